#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "common.hpp"
#include "oracles.hpp"
#include "spectra.hpp"

namespace eoslab::manifold {

/// A point of the minimizer manifold together with its Hessian spectrum.
struct ManifoldPoint {
  Vector phi;                       // unit vector on the manifold
  spectra::SpectrumResult spectrum; // at phi
  double mu = 0.0;                  // 2 / lambda1
  double loss = 0.0;                // loss at phi (<= projection tolerance)
  std::optional<int> rank;          // Hessian rank used for null-space splits
};

struct ProjectOptions {
  double loss_tol = 1e-12;
  double inner_lr = 0.005;
  long max_inner_steps = 2000000;
  std::optional<int> rank;
  int dense_dim_threshold = 256;  // full eigendecomposition below this
  spectra::LanczosOptions lanczos = spectra::sharpness_defaults();
  bool skip_spectrum = false;     // phi only; spectrum left empty
};

/// Gradient-flow projection onto the minimizer manifold, realized as
/// projected gradient descent on the sphere with a fixed small learning rate
/// until the loss reaches loss_tol. Throws NoConvergenceError (carrying the
/// final loss) when the step budget runs out.
ManifoldPoint gf_project(const Vector& theta, const oracles::LossOracle& oracle,
                         const ProjectOptions& opts = {});

/// (I - phi phi') P0 v: the projection of v onto the manifold tangent space,
/// with P0 the projector onto the Hessian null space (top `rank` eigenpairs
/// removed). Requires a dense spectrum; throws if the spectral gap at the
/// rank cut is below gap_tol (null space not separable).
Vector tangent_project(const ManifoldPoint& point, const Vector& v, int rank,
                       double gap_tol = 1e-6);

/// Orthonormal basis of the manifold tangent space at the point (null space
/// of the Hessian with the radial direction removed).
Matrix tangent_basis(const ManifoldPoint& point, int rank);

struct GradLogSharpOptions {
  double fd_step = 1e-4;
  double gap_tol = 1e-6;
  ProjectOptions proj;
};

/// Tangent gradient of log lambda1 by central differences through the
/// projection: probes phi +- tau b_i along an orthonormal tangent basis,
/// retracts each probe back to the manifold, and differentiates log lambda1.
Vector grad_log_sharpness(const ManifoldPoint& point,
                          const oracles::LossOracle& oracle,
                          const GradLogSharpOptions& opts);

/// Analytic fast path for linear regression with BN: on the manifold
/// lambda1 is a constant multiple of |wt|^2, so
/// grad_Gamma log lambda1 = grad_Gamma log |wt|^2.
Vector grad_log_sharpness_linreg(const oracles::LinRegBNProblem& problem,
                                 const ManifoldPoint& point);

/// Sharpness-reduction flow state on the manifold.
struct FlowState {
  Vector zeta;
  double tau = 0.0;
  double c_b = 2.0;  // 2 for GD+WD
};

using TangentGrad = std::function<Vector(const ManifoldPoint&)>;

struct FlowOptions {
  TangentGrad grad;  // tangent gradient of log lambda1 at a manifold point
  ProjectOptions proj;
};

/// One RK4 step of
///   dzeta/dtau = -grad / (4 + (2/c_b) |grad|^2),
/// each stage and the result retracted to the manifold (normalize, then
/// gradient-flow projection).
FlowState flow_step(const FlowState& state, double dtau,
                    const oracles::LossOracle& oracle, const FlowOptions& opts);

struct FlowSample {
  double tau;
  Vector zeta;
  double lambda1;
  double grad_norm;
};

/// Integrates the flow for `steps` steps of size dtau, sampling after every
/// step (index 0 is the initial state). Stops early when `stop` returns true.
std::vector<FlowSample> run_flow(
    FlowState init, double dtau, long steps, const oracles::LossOracle& oracle,
    const FlowOptions& opts,
    const std::function<bool(const FlowSample&)>& stop = {});

/// Oscillation observables of an iterate around its manifold projection.
struct DriftObservables {
  Vector x;          // theta - phi
  Vector v1;         // oriented top eigenvector actually used
  double h = 0.0;    // <x, v1(phi)>, unscaled
  double h_scaled = 0.0;  // h / eta
  double u = 0.0;    // (mu^2 v_tilde - 1) / eta
  std::optional<double> misalignment;  // |P_{!=0,1} x|
  std::optional<double> p0_residual;   // |P0 x|
};

/// v1 is oriented to have positive inner product with `v1_ref` when given
/// (so consecutive calls see a continuous eigenvector field); otherwise the
/// component of largest magnitude is made positive.
DriftObservables extract_observables(const Vector& theta, double v_tilde,
                                     double eta, const ManifoldPoint& point,
                                     const Vector* v1_ref = nullptr);

/// Exact solution of min |w|^2 s.t. w'x_i + b = y_i via the KKT system on
/// centered data. Throws if the constraints are infeasible.
std::pair<Vector, double> min_norm_solution(const Matrix& X, const Vector& y);
std::pair<Vector, double> min_norm_oracle(const oracles::LinRegBNProblem& p);

/// Closed-form Hessian 2 |wt|^2 (Sigma_x - z z') at a manifold point; throws
/// if w is off-manifold (interpolation residual above membership_tol).
Matrix linreg_hessian_on_manifold(const oracles::LinRegBNProblem& p,
                                  const Vector& w,
                                  double membership_tol = 1e-6);

/// Hessian rank on the linreg manifold: rank(centered X) - 1 (the output
/// normalization plus scale invariance each annihilate one more direction
/// than the raw feature rank).
int linreg_hessian_rank(const oracles::LinRegBNProblem& p);

/// A point of the linreg minimizer manifold: the min-norm interpolator plus a
/// random null-space component of the given spread, normalized to the sphere.
Vector linreg_manifold_point(const oracles::LinRegBNProblem& p, Rng& rng,
                             double spread);

}  // namespace eoslab::manifold
