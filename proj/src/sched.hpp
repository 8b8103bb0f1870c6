#pragma once

#include <span>
#include <vector>

#include "common.hpp"

namespace eoslab::sched {

/// State of an RMSprop-family gradient-based learning-rate scheduler.
/// The moment estimate v_tilde stays strictly positive; the emitted effective
/// learning rate is 1/sqrt(v_tilde) *before* the moment update (pre-update
/// convention throughout).
struct SchedulerState {
  double v_tilde;  // moment estimate, > 0
  double eta;      // base learning rate
  double beta;     // decay rate in (0, 1]
  long t = 0;

  void validate() const {
    if (!(v_tilde > 0.0)) throw std::invalid_argument("scheduler: v_tilde <= 0");
    if (!(eta >= 0.0)) throw std::invalid_argument("scheduler: eta < 0");
    if (!(beta > 0.0) || beta > 1.0)
      throw std::invalid_argument("scheduler: beta outside (0, 1]");
  }
};

struct SchedStep {
  double eff_lr;
  SchedulerState next;
};

/// eff_lr = 1/sqrt(v_t); v_{t+1} = beta v_t + (1-beta) (|g|/eta)^2.
SchedStep rmsprop_step(const SchedulerState& s, double grad_norm);
inline SchedStep rmsprop_step(const SchedulerState& s, const Vector& g) {
  return rmsprop_step(s, g.norm());
}

/// RMSprop plus the exact fourth-order correction term
/// (1-beta)^2 gbar^4 / (4 beta v_t); this recursion reproduces the effective
/// learning rates of gradient descent with weight decay on a scale-invariant
/// loss exactly.
SchedStep gwsi_step(const SchedulerState& s, double grad_norm);
inline SchedStep gwsi_step(const SchedulerState& s, const Vector& g) {
  return gwsi_step(s, g.norm());
}

/// Scheduler state equivalent to GD+WD with the given hyperparameters and
/// initial parameter norm:
///   v0 = (1 - eh*lh)^2 |w0|^4 / eh^2,  beta = (1 - eh*lh)^4,
///   eta = sqrt((1/beta - 1)/2).
/// Requires eh > 0 and eh*lh in [0, 1).
SchedulerState gwsi_from_gdwd(double eta_hat, double lambda_hat, double w0_norm);

/// Per-step deviations of an effective-LR sequence from the plain RMSprop
/// recursion with hyperparameters (eta, beta):
///   delta1_t = |eff_lr_t - 1/sqrt(v_t)|
///   delta2_t = |v_{t+1} - (beta v_t + (1-beta) (g_t/eta)^2)|
/// `vtilde` must have one more element than `eff_lrs` and `grad_norms`.
struct QrmsResiduals {
  std::vector<double> delta1;
  std::vector<double> delta2;
};
QrmsResiduals qrms_residuals(std::span<const double> eff_lrs,
                             std::span<const double> vtilde,
                             std::span<const double> grad_norms, double eta,
                             double beta);

}  // namespace eoslab::sched
