#include "driftsim.hpp"

#include <cmath>

namespace eoslab::driftsim {

DriftState drift_transition(const DriftState& s, double eta, double c_b,
                            const AttachedGrad& attached) {
  if (!(eta > 0.0) || eta > 0.1)
    throw std::invalid_argument("drift_transition: eta outside (0, 0.1]");
  if (!(c_b > 0.0)) throw std::invalid_argument("drift_transition: c_b <= 0");
  DriftState next = s;
  next.h = (1.0 - 2.0 * eta * s.u) * s.h;
  next.u = s.u + 4.0 * eta * s.h * s.h * (2.0 * c_b + s.grad_norm_sq) -
           2.0 * eta * c_b;
  if (s.phi && attached) {
    const Vector g = attached(*s.phi);
    next.phi = *s.phi - 2.0 * eta * eta * s.h * s.h * g;
    next.grad_norm_sq = g.squaredNorm();
  }
  return next;
}

double energy(const DriftState& s, double c_b) {
  if (s.h == 0.0) throw std::domain_error("energy: h = 0 (log|h| undefined)");
  if (!(c_b > 0.0)) throw std::invalid_argument("energy: c_b <= 0");
  return 0.5 * s.u * s.u + (2.0 * c_b + s.grad_norm_sq) * s.h * s.h +
         c_b * std::log(1.0 / std::abs(s.h));
}

std::pair<double, double> ham_ode_step(double x, double v, double dtau,
                                       const HamiltonianParams& params) {
  if (!std::isfinite(x) || !std::isfinite(v))
    throw std::invalid_argument("ham_ode_step: non-finite state");
  v -= 0.5 * dtau * params.potential_grad(x);
  x += dtau * v;
  v -= 0.5 * dtau * params.potential_grad(x);
  return {x, v};
}

std::pair<double, double> ham_ode_step_rk4(double x, double v, double dtau,
                                           const HamiltonianParams& params) {
  if (!std::isfinite(x) || !std::isfinite(v))
    throw std::invalid_argument("ham_ode_step_rk4: non-finite state");
  auto acc = [&](double xx) { return -params.potential_grad(xx); };
  const double k1x = v, k1v = acc(x);
  const double k2x = v + 0.5 * dtau * k1v, k2v = acc(x + 0.5 * dtau * k1x);
  const double k3x = v + 0.5 * dtau * k2v, k3v = acc(x + 0.5 * dtau * k2x);
  const double k4x = v + dtau * k3v, k4v = acc(x + dtau * k3x);
  return {x + dtau / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
          v + dtau / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)};
}

namespace {

// Integrates one full period from (x0, 0): the trajectory leaves the turning
// point, crosses v=0 once on the far side, and the period ends at the next
// v sign change back; the endpoint is refined by linear interpolation of the
// crossing so closure is O(dtau^2) rather than O(dtau).
struct PeriodRun {
  double period;
  std::vector<std::pair<double, double>> pts;  // includes start, excludes end
  std::pair<double, double> end;
};

PeriodRun integrate_period(double x0, const HamiltonianParams& params,
                           double dtau) {
  PeriodRun run;
  double x = x0, v = 0.0, t = 0.0;
  run.pts.emplace_back(x, v);
  // First half-step direction: from a right turning point the particle falls
  // left (U' > 0 => v decreases). From a left turning point it rises.
  int crossings = 0;
  double prev_v = v;
  const long max_steps = static_cast<long>(1e9);
  for (long i = 0; i < max_steps; ++i) {
    auto [nx, nv] = ham_ode_step(x, v, dtau, params);
    t += dtau;
    if (i > 0 && prev_v != 0.0 && nv != 0.0 &&
        ((prev_v < 0.0) != (nv < 0.0))) {
      ++crossings;
      if (crossings == 2) {
        // Interpolate the crossing time inside this step.
        const double frac = prev_v / (prev_v - nv);
        run.period = t - dtau + frac * dtau;
        run.end = {x + frac * (nx - x), 0.0};
        return run;
      }
    }
    prev_v = nv;
    x = nx;
    v = nv;
    run.pts.emplace_back(x, v);
  }
  throw NoConvergenceError("phase_portrait: period not found", x0, 0.0);
}

}  // namespace

std::vector<Orbit> phase_portrait(const HamiltonianParams& params,
                                  std::span<const double> energy_levels,
                                  int samples_per_orbit, double dtau) {
  if (samples_per_orbit < 2)
    throw std::invalid_argument("phase_portrait: need >= 2 samples per orbit");
  const double xstar = params.fixed_point();
  const double emin = params.potential(xstar);
  std::vector<Orbit> orbits;
  for (double level : energy_levels) {
    if (!(level > emin))
      throw std::invalid_argument("phase_portrait: energy level below potential minimum");
    // Right turning point: U(x) = level, x > xstar (bisection).
    double lo = xstar, hi = xstar + 1.0;
    while (params.potential(hi) < level) hi += 1.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (params.potential(mid) < level ? lo : hi) = mid;
    }
    const double x0 = 0.5 * (lo + hi);
    PeriodRun run = integrate_period(x0, params, dtau);
    Orbit orbit;
    orbit.energy_level = level;
    orbit.period = run.period;
    orbit.closure = std::hypot(run.end.first - x0, run.end.second - 0.0);
    // Resample uniformly in time.
    orbit.points.reserve(samples_per_orbit);
    const double stride =
        run.period / samples_per_orbit / dtau;  // steps per sample
    for (int k = 0; k < samples_per_orbit; ++k) {
      const auto idx = static_cast<std::size_t>(k * stride);
      orbit.points.push_back(run.pts[std::min(idx, run.pts.size() - 1)]);
    }
    orbits.push_back(std::move(orbit));
  }
  return orbits;
}

namespace {
// Positive-to-negative u crossings delimit periods.
std::vector<std::size_t> period_marks(std::span<const DriftState> traj) {
  std::vector<std::size_t> marks;
  for (std::size_t i = 0; i + 1 < traj.size(); ++i)
    if (traj[i].u > 0.0 && traj[i + 1].u <= 0.0) marks.push_back(i + 1);
  return marks;
}
}  // namespace

int count_periods(std::span<const DriftState> traj) {
  const auto marks = period_marks(traj);
  return marks.empty() ? 0 : static_cast<int>(marks.size()) - 1;
}

double average_h2(std::span<const DriftState> traj,
                  std::optional<std::pair<std::size_t, std::size_t>> window) {
  std::size_t lo = 0, hi = traj.size();
  if (window) {
    lo = window->first;
    hi = std::min(window->second, traj.size());
  }
  if (lo >= hi) throw std::invalid_argument("average_h2: empty window");
  const auto sub = traj.subspan(lo, hi - lo);
  const auto marks = period_marks(sub);
  if (marks.size() < 2)
    throw std::invalid_argument("average_h2: window shorter than one full period");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = marks.front(); i < marks.back(); ++i) {
    sum += sub[i].h * sub[i].h;
    ++count;
  }
  return sum / static_cast<double>(count);
}

}  // namespace eoslab::driftsim
