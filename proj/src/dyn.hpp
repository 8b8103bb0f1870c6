#pragma once

#include <functional>

#include "common.hpp"
#include "oracles.hpp"
#include "sched.hpp"

namespace eoslab::dyn {

/// Gradient descent with decoupled weight decay:
///   w <- (1 - eta_hat*lambda_hat) w - eta_hat * grad L(w).
struct GDWDConfig {
  double eta_hat;     // learning rate, > 0
  double lambda_hat;  // weight decay, >= 0

  double eta_in() const { return eta_hat * lambda_hat; }  // intrinsic LR

  void validate() const {
    if (!(eta_hat > 0.0)) throw std::invalid_argument("gdwd: eta_hat <= 0");
    if (!(lambda_hat >= 0.0)) throw std::invalid_argument("gdwd: lambda_hat < 0");
    if (eta_in() > 0.5) throw std::invalid_argument("gdwd: eta_hat*lambda_hat > 1/2");
  }
};

struct OptState {
  Vector w;
  long t = 0;

  double norm() const { return w.norm(); }
  Vector theta() const { return w / w.norm(); }
  /// Effective LR of the equivalent projected GD on the sphere.
  double eff_lr(const GDWDConfig& cfg) const {
    return cfg.eta_hat / ((1.0 - cfg.eta_in()) * w.squaredNorm());
  }
};

/// One GD+WD step in ambient space. Throws DivergedError on non-finite values.
OptState gdwd_step(const OptState& s, const GDWDConfig& cfg,
                   const oracles::LossOracle& oracle);

/// One projected-GD step on the unit sphere: theta' = Pi(theta - lr grad).
Vector pgd_step(const Vector& theta, double eff_lr,
                const oracles::LossOracle& oracle);

/// One Scalar-RMSprop step in ambient space (no projection): the parameter
/// update is plain GD with the effective LR emitted by the RMSprop scheduler,
/// so a (scheduler + GD) composition reproduces it bit for bit.
std::pair<Vector, sched::SchedulerState> scalar_rmsprop_step(
    const Vector& theta, const sched::SchedulerState& s,
    const oracles::LossOracle& oracle);

/// Observer invoked before each update with the current iterate, its gradient
/// and the effective LR about to be applied, plus once more for the final
/// state; `t` counts completed steps.
using StepObserver = std::function<void(long t, const OptState& state,
                                        const Vector& grad_w, double eff_lr)>;

/// Runs `steps` GD+WD updates. The observer (if any) is called at every step
/// with the pre-update state; gradient is computed exactly once per step and
/// shared between the observer and the update. Aborts with DivergedError on
/// non-finite gradients or iterates; observer exceptions are wrapped with the
/// step index.
OptState run_gdwd(OptState initial, const GDWDConfig& cfg,
                  const oracles::LossOracle& oracle, long steps,
                  const StepObserver& observer = {});

/// Same loop for Scalar RMSprop in ambient space.
std::pair<OptState, sched::SchedulerState> run_scalar_rmsprop(
    OptState initial, sched::SchedulerState sstate,
    const oracles::LossOracle& oracle, long steps,
    const StepObserver& observer = {});

}  // namespace eoslab::dyn
