#include "sched.hpp"

namespace eoslab::sched {

namespace {
// gbar^2 = (|g|/eta)^2, with the beta = 1 (zero weight decay) limit where the
// (1-beta) terms vanish and gbar never enters.
double gbar_sq(const SchedulerState& s, double grad_norm) {
  if (s.beta == 1.0) return 0.0;
  const double gbar = grad_norm / s.eta;
  return gbar * gbar;
}
}  // namespace

SchedStep rmsprop_step(const SchedulerState& s, double grad_norm) {
  s.validate();
  const double eff = 1.0 / std::sqrt(s.v_tilde);
  const double g2 = gbar_sq(s, grad_norm);
  SchedulerState next = s;
  next.v_tilde = s.beta * s.v_tilde + (1.0 - s.beta) * g2;
  next.t = s.t + 1;
  return {eff, next};
}

SchedStep gwsi_step(const SchedulerState& s, double grad_norm) {
  s.validate();
  const double eff = 1.0 / std::sqrt(s.v_tilde);
  const double g2 = gbar_sq(s, grad_norm);
  const double omb = 1.0 - s.beta;
  SchedulerState next = s;
  next.v_tilde = s.beta * s.v_tilde + omb * g2 +
                 omb * omb * g2 * g2 / (4.0 * s.beta * s.v_tilde);
  next.t = s.t + 1;
  return {eff, next};
}

SchedulerState gwsi_from_gdwd(double eta_hat, double lambda_hat,
                              double w0_norm) {
  if (!(eta_hat > 0.0)) throw std::invalid_argument("gwsi_from_gdwd: eta_hat <= 0");
  if (!(lambda_hat >= 0.0))
    throw std::invalid_argument("gwsi_from_gdwd: lambda_hat < 0");
  const double p = eta_hat * lambda_hat;
  if (p >= 1.0)
    throw std::invalid_argument("gwsi_from_gdwd: eta_hat*lambda_hat >= 1");
  if (!(w0_norm > 0.0)) throw std::invalid_argument("gwsi_from_gdwd: |w0| <= 0");
  SchedulerState s;
  const double n2 = w0_norm * w0_norm;
  s.v_tilde = (1.0 - p) * (1.0 - p) * n2 * n2 / (eta_hat * eta_hat);
  s.beta = (1.0 - p) * (1.0 - p) * (1.0 - p) * (1.0 - p);
  s.eta = std::sqrt((1.0 / s.beta - 1.0) / 2.0);
  s.t = 0;
  return s;
}

QrmsResiduals qrms_residuals(std::span<const double> eff_lrs,
                             std::span<const double> vtilde,
                             std::span<const double> grad_norms, double eta,
                             double beta) {
  const std::size_t T = eff_lrs.size();
  if (grad_norms.size() != T || vtilde.size() != T + 1)
    throw std::invalid_argument("qrms_residuals: sequence length mismatch");
  if (!(beta > 0.0) || beta > 1.0)
    throw std::invalid_argument("qrms_residuals: beta outside (0, 1]");
  QrmsResiduals r;
  r.delta1.resize(T);
  r.delta2.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    r.delta1[t] = std::abs(eff_lrs[t] - 1.0 / std::sqrt(vtilde[t]));
    double g2 = 0.0;
    if (beta < 1.0) {
      const double gbar = grad_norms[t] / eta;
      g2 = gbar * gbar;
    }
    r.delta2[t] = std::abs(vtilde[t + 1] - (beta * vtilde[t] + (1.0 - beta) * g2));
  }
  return r;
}

}  // namespace eoslab::sched
