#include "dyn.hpp"

namespace eoslab::dyn {

namespace {
void check_finite(const Vector& v, const char* what, long step) {
  if (!all_finite(v))
    throw DivergedError(std::string("non-finite ") + what + " at step " +
                            std::to_string(step),
                        step);
}

void notify(const StepObserver& observer, long t, const OptState& s,
            const Vector& g, double eff) {
  if (!observer) return;
  try {
    observer(t, s, g, eff);
  } catch (const DivergedError&) {
    throw;
  } catch (const std::exception& e) {
    throw std::runtime_error("observer failed at step " + std::to_string(t) +
                             ": " + e.what());
  }
}
}  // namespace

OptState gdwd_step(const OptState& s, const GDWDConfig& cfg,
                   const oracles::LossOracle& oracle) {
  if (!(s.norm() > 0.0)) throw std::domain_error("gdwd_step: |w| = 0");
  const Vector g = oracle.grad(s.w);
  check_finite(g, "gradient", s.t);
  OptState next;
  next.w = (1.0 - cfg.eta_in()) * s.w - cfg.eta_hat * g;
  next.t = s.t + 1;
  check_finite(next.w, "iterate", next.t);
  return next;
}

Vector pgd_step(const Vector& theta, double eff_lr,
                const oracles::LossOracle& oracle) {
  const Vector step = theta - eff_lr * oracle.grad(theta);
  const double n = step.norm();
  if (!(n > 0.0))
    throw std::domain_error("pgd_step: update hit the origin, projection undefined");
  return step / n;
}

std::pair<Vector, sched::SchedulerState> scalar_rmsprop_step(
    const Vector& theta, const sched::SchedulerState& s,
    const oracles::LossOracle& oracle) {
  const Vector g = oracle.grad(theta);
  const auto [eff, next] = sched::rmsprop_step(s, g.norm());
  return {theta - eff * g, next};
}

OptState run_gdwd(OptState initial, const GDWDConfig& cfg,
                  const oracles::LossOracle& oracle, long steps,
                  const StepObserver& observer) {
  cfg.validate();
  OptState s = std::move(initial);
  check_finite(s.w, "iterate", s.t);
  const double decay = 1.0 - cfg.eta_in();
  for (long i = 0; i < steps; ++i) {
    const Vector g = oracle.grad(s.w);
    check_finite(g, "gradient", s.t);
    notify(observer, s.t, s, g, s.eff_lr(cfg));
    OptState next;
    next.w = decay * s.w - cfg.eta_hat * g;
    next.t = s.t + 1;
    check_finite(next.w, "iterate", next.t);
    s = std::move(next);
  }
  if (observer) {
    const Vector g = oracle.grad(s.w);
    check_finite(g, "gradient", s.t);
    notify(observer, s.t, s, g, s.eff_lr(cfg));
  }
  return s;
}

std::pair<OptState, sched::SchedulerState> run_scalar_rmsprop(
    OptState initial, sched::SchedulerState sstate,
    const oracles::LossOracle& oracle, long steps,
    const StepObserver& observer) {
  sstate.validate();
  OptState s = std::move(initial);
  check_finite(s.w, "iterate", s.t);
  for (long i = 0; i < steps; ++i) {
    const Vector g = oracle.grad(s.w);
    check_finite(g, "gradient", s.t);
    const auto [eff, next_sched] = sched::rmsprop_step(sstate, g.norm());
    notify(observer, s.t, s, g, eff);
    OptState next;
    next.w = s.w - eff * g;
    next.t = s.t + 1;
    check_finite(next.w, "iterate", next.t);
    s = std::move(next);
    sstate = next_sched;
  }
  if (observer) {
    const Vector g = oracle.grad(s.w);
    check_finite(g, "gradient", s.t);
    notify(observer, s.t, s, g, 1.0 / std::sqrt(sstate.v_tilde));
  }
  return {s, sstate};
}

}  // namespace eoslab::dyn
