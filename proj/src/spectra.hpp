#pragma once

#include <functional>
#include <optional>

#include "common.hpp"
#include "oracles.hpp"

namespace eoslab::spectra {

using LinOp = std::function<Vector(const Vector&)>;

struct SpectrumResult {
  double lambda1 = 0.0;
  Vector v1;
  std::optional<double> lambda2;       // second largest (zeros included)
  std::optional<double> lambda_small;  // rank-th largest, i.e. smallest nonzero
  int iters = 0;
  double residual = 0.0;  // |H v1 - lambda1 v1|
  bool top_eigen_unique = true;

  // Dense path only: full eigendecomposition, eigenvalues descending.
  std::optional<Vector> full_evals;
  std::optional<Matrix> full_basis;  // columns match full_evals
};

struct LanczosOptions {
  int k = 60;                 // Krylov subspace size (capped at dim)
  std::uint64_t seed = 1;     // seeds the start vector
  double tol = 1e-10;         // residual <= tol * max(|lambda1|, 1)
  int max_restarts = 40;
  std::optional<int> rank;    // fills lambda_small when k reaches it
  bool want_lambda2 = false;  // deflated second pass for lambda2
};

/// Largest-algebraic eigenpair of a symmetric operator via Lanczos with a
/// seeded Gaussian start vector and full reorthogonalization, restarting from
/// the current Ritz vector until the residual meets the tolerance.
/// Deterministic for a fixed seed. Throws NoConvergenceError (carrying the
/// best estimate and residual) if max_restarts is exhausted.
SpectrumResult lanczos_top(const LinOp& apply, int dim,
                           const LanczosOptions& opts = {});

/// Full dense spectrum (descending); `rank` fills lambda_small and the
/// top-eigenvalue uniqueness flag the same way the Lanczos path does.
SpectrumResult dense_spectrum(const Matrix& H, std::optional<int> rank = {});

/// Dense Hessian assembled column-by-column from HVPs, symmetrized.
Matrix dense_hessian(const oracles::LossOracle& oracle, const Vector& w);

inline LanczosOptions sharpness_defaults() {
  LanczosOptions o;
  o.tol = 1e-7;  // FD-backed HVPs bottom out around here
  return o;
}

/// lambda_1 of the Hessian at w/|w|, computed as |w|^2 lambda_1(H(w)).
double spherical_sharpness(const oracles::LossOracle& oracle, const Vector& w,
                           const LanczosOptions& opts = sharpness_defaults());

/// Relative eigenvalue gap min(lambda1 - lambda2, lambda_small) / lambda1.
/// Requires lambda1 > 0 and both secondary eigenvalues present.
double eigen_gap(const SpectrumResult& spec);

/// Generalization-gap upper bound from sharpness:
///   sigma^2 lambda1 / 2
///   + (16 sigma^3 / 3) m3 (1 + ((ln n)/D)^{3/2})
///   + ell_max sqrt((D/sigma^2 + 2 ln(n/delta)) / (n-1)).
/// Preconditions: sigma <= 1/(2 + 2 sqrt((ln n)/D)), n >= 2, delta in (0,1).
double pac_bayes_bound(double lambda1, double m3, double ell_max, long long n,
                       int D, double sigma, double delta);

}  // namespace eoslab::spectra
