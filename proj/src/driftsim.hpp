#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "common.hpp"

namespace eoslab::driftsim {

/// Abstract state of the two-step oscillation process: h is the signed
/// oscillation magnitude along the top eigenvector, u the offset from the
/// edge of stability, grad_norm_sq the squared tangent gradient of
/// log lambda1 at the attached manifold point (or a frozen constant in pure
/// simulation mode).
struct DriftState {
  double h = 0.0;
  double u = 0.0;
  double grad_norm_sq = 0.0;
  std::optional<Vector> phi;  // attached manifold point, if any
};

struct HamiltonianParams {
  double K;    // sqrt(2 c_b + |grad|^2)
  double c_b;

  static HamiltonianParams from(double c_b, double grad_norm_sq) {
    if (!(c_b > 0.0)) throw std::invalid_argument("hamiltonian: c_b <= 0");
    if (!(grad_norm_sq >= 0.0))
      throw std::invalid_argument("hamiltonian: grad_norm_sq < 0");
    return {std::sqrt(2.0 * c_b + grad_norm_sq), c_b};
  }

  /// Potential U(x) = K^2 e^{2x} - c_b x  for x = log|h|.
  double potential(double x) const { return K * K * std::exp(2.0 * x) - c_b * x; }
  double potential_grad(double x) const {
    return 2.0 * K * K * std::exp(2.0 * x) - c_b;
  }
  /// Bottom of the potential well, x* = log(c_b / (2 K^2)) / 2.
  double fixed_point() const { return 0.5 * std::log(c_b / (2.0 * K * K)); }
};

/// Manifold attachment for drift transitions: returns the tangent gradient of
/// log lambda1 at (the retraction of) phi.
using AttachedGrad = std::function<Vector(const Vector& phi)>;

/// The ideal two-step transition:
///   h'   = (1 - 2 eta u) h
///   u'   = u + 4 eta h^2 (2 c_b + |grad|^2) - 2 eta c_b
///   phi' = phi - 2 eta^2 h^2 grad            (attached mode only)
/// Enforces eta <= 0.1; in frozen mode grad_norm_sq is carried over unchanged.
DriftState drift_transition(const DriftState& s, double eta, double c_b,
                            const AttachedGrad& attached = {});

/// E(S) = u^2/2 + (2 c_b + |grad|^2) h^2 + c_b log(1/|h|). Domain error at h=0.
double energy(const DriftState& s, double c_b);

/// One leapfrog (kick-drift-kick) step of the continuous limit
///   x'' = -(2 K^2 e^{2x} - c_b)  with x = log|h|, v = -u.
std::pair<double, double> ham_ode_step(double x, double v, double dtau,
                                       const HamiltonianParams& params);

/// Classical RK4 step of the same system; non-symplectic, kept as a
/// cross-check for the leapfrog trajectories.
std::pair<double, double> ham_ode_step_rk4(double x, double v, double dtau,
                                           const HamiltonianParams& params);

struct Orbit {
  double energy_level;
  double period;
  double closure;  // end-to-start distance after one period
  std::vector<std::pair<double, double>> points;  // (log|h|, -u)
};

/// Closed orbits of the Hamiltonian at the requested energy levels, sampled
/// uniformly in time over one period each. Energy levels below the potential
/// minimum are rejected.
std::vector<Orbit> phase_portrait(const HamiltonianParams& params,
                                  std::span<const double> energy_levels,
                                  int samples_per_orbit, double dtau = 1e-4);

/// Windowed mean of h^2 over full periods. Periods are delimited by
/// positive-to-negative crossings of u; throws if the window holds less than
/// one full period.
double average_h2(std::span<const DriftState> traj,
                  std::optional<std::pair<std::size_t, std::size_t>> window = {});

/// Number of complete periods (u sign structure) inside the trajectory.
int count_periods(std::span<const DriftState> traj);

}  // namespace eoslab::driftsim
