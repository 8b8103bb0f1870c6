#include "spectra.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace eoslab::spectra {

namespace {

constexpr double kUniqueGapTol = 1e-8;  // relative gap below this => flag repeated top

struct RitzPair {
  double value;
  Vector vector;
};

// One Lanczos sweep with full reorthogonalization starting from v0 (assumed
// unit). Orthogonalizes against `deflate` columns throughout when provided.
// Returns the Ritz pairs of the tridiagonal, descending.
std::vector<RitzPair> lanczos_sweep(const LinOp& apply, int dim, Vector v0,
                                    int k, const Matrix* deflate, int* iters) {
  k = std::min(k, dim);
  Matrix V(dim, k);
  std::vector<double> alpha, beta;  // beta[j] couples column j and j+1
  auto reorth = [&](Vector& v, int upto) {
    for (int pass = 0; pass < 2; ++pass) {
      if (deflate)
        v -= (*deflate) * (deflate->transpose() * v);
      for (int j = 0; j < upto; ++j) v -= V.col(j).dot(v) * V.col(j);
    }
  };
  if (deflate) {
    reorth(v0, 0);
    const double n = v0.norm();
    if (n < 1e-14) return {};
    v0 /= n;
  }
  V.col(0) = v0;
  int m = 0;
  for (int j = 0; j < k; ++j) {
    Vector w = apply(V.col(j));
    ++*iters;
    const double a = V.col(j).dot(w);
    alpha.push_back(a);
    m = j + 1;
    if (j + 1 == k) break;
    w -= a * V.col(j);
    if (j > 0) w -= beta[j - 1] * V.col(j - 1);
    reorth(w, j + 1);
    const double b = w.norm();
    if (b < 1e-13 * std::max(1.0, std::abs(a))) break;  // invariant subspace
    beta.push_back(b);
    V.col(j + 1) = w / b;
  }
  Matrix T = Matrix::Zero(m, m);
  for (int j = 0; j < m; ++j) {
    T(j, j) = alpha[j];
    if (j + 1 < m) T(j, j + 1) = T(j + 1, j) = beta[j];
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(T);
  std::vector<RitzPair> ritz(m);
  for (int i = 0; i < m; ++i) {
    const int src = m - 1 - i;  // descending
    ritz[i].value = es.eigenvalues()[src];
    ritz[i].vector = V.leftCols(m) * es.eigenvectors().col(src);
    ritz[i].vector.normalize();
  }
  return ritz;
}

RitzPair converge_top(const LinOp& apply, int dim, Vector start,
                      const LanczosOptions& opts, const Matrix* deflate,
                      int* iters, double* residual_out) {
  RitzPair best{-std::numeric_limits<double>::infinity(), start};
  double best_res = std::numeric_limits<double>::infinity();
  Vector v0 = std::move(start);
  for (int r = 0; r <= opts.max_restarts; ++r) {
    auto ritz = lanczos_sweep(apply, dim, v0, opts.k, deflate, iters);
    if (ritz.empty()) break;  // start vector entirely inside deflated space
    const RitzPair& top = ritz.front();
    Vector Av = apply(top.vector);
    ++*iters;
    const double lam = top.vector.dot(Av);
    const double res = (Av - lam * top.vector).norm();
    if (res < best_res) {
      best = {lam, top.vector};
      best_res = res;
    }
    if (res <= opts.tol * std::max(std::abs(lam), 1.0)) {
      *residual_out = res;
      return {lam, top.vector};
    }
    v0 = top.vector;  // restart from the Ritz vector
  }
  *residual_out = best_res;
  throw NoConvergenceError("lanczos_top: residual " + std::to_string(best_res) +
                               " above tolerance after restarts",
                           best.value, best_res);
}

}  // namespace

SpectrumResult lanczos_top(const LinOp& apply, int dim,
                           const LanczosOptions& opts) {
  if (dim < 1) throw std::invalid_argument("lanczos_top: dim < 1");
  if (opts.k < 1) throw std::invalid_argument("lanczos_top: k < 1");
  SpectrumResult out;
  Rng rng(opts.seed);
  Vector v0 = rng.unit_vector(dim);

  int iters = 0;
  double residual = 0.0;
  RitzPair top = converge_top(apply, dim, v0, opts, nullptr, &iters, &residual);
  out.lambda1 = top.value;
  out.v1 = top.vector;
  out.residual = residual;

  const bool need_small =
      opts.rank.has_value() && *opts.rank >= 1 && *opts.rank <= dim;
  if (opts.want_lambda2 || need_small) {
    // Secondary Ritz values from one more sweep in the deflated complement of
    // v1; interior values are exact when k reaches dim (our small-dim usage).
    Matrix defl(dim, 1);
    defl.col(0) = out.v1;
    if (dim >= 2) {
      LanczosOptions sub = opts;
      sub.k = std::min(dim - 1, std::max(opts.k, need_small ? *opts.rank + 8 : 2));
      Vector w0 = Rng(opts.seed ^ 0x9e3779b9ULL).unit_vector(dim);
      int it2 = 0;
      double res2 = 0.0;
      try {
        RitzPair second =
            converge_top(apply, dim, w0, sub, &defl, &it2, &res2);
        out.lambda2 = second.value;
      } catch (const NoConvergenceError& e) {
        out.lambda2 = e.best_estimate;  // still a usable Ritz estimate
      }
      iters += it2;
      if (need_small) {
        auto ritz = lanczos_sweep(apply, dim, rng.unit_vector(dim),
                                  std::min(dim, std::max(sub.k + 1, *opts.rank + 8)),
                                  nullptr, &iters);
        if (static_cast<int>(ritz.size()) >= *opts.rank)
          out.lambda_small = ritz[*opts.rank - 1].value;
      }
    } else {
      out.lambda2 = out.lambda1;
      if (need_small) out.lambda_small = out.lambda1;
    }
    if (out.lambda2)
      out.top_eigen_unique =
          out.lambda1 - *out.lambda2 >
          kUniqueGapTol * std::max(std::abs(out.lambda1), 1.0);
  }
  out.iters = iters;
  return out;
}

SpectrumResult dense_spectrum(const Matrix& H, std::optional<int> rank) {
  if (H.rows() != H.cols()) throw std::invalid_argument("dense_spectrum: not square");
  Eigen::SelfAdjointEigenSolver<Matrix> es(H);
  const int n = static_cast<int>(H.rows());
  SpectrumResult out;
  Vector evals(n);
  Matrix basis(n, n);
  for (int i = 0; i < n; ++i) {
    evals[i] = es.eigenvalues()[n - 1 - i];
    basis.col(i) = es.eigenvectors().col(n - 1 - i);
  }
  out.lambda1 = evals[0];
  out.v1 = basis.col(0);
  if (n >= 2) out.lambda2 = evals[1];
  if (rank && *rank >= 1 && *rank <= n) out.lambda_small = evals[*rank - 1];
  out.residual = (H * out.v1 - out.lambda1 * out.v1).norm();
  out.iters = n;
  if (out.lambda2)
    out.top_eigen_unique = out.lambda1 - *out.lambda2 >
                           kUniqueGapTol * std::max(std::abs(out.lambda1), 1.0);
  out.full_evals = std::move(evals);
  out.full_basis = std::move(basis);
  return out;
}

Matrix dense_hessian(const oracles::LossOracle& oracle, const Vector& w) {
  const int d = oracle.dim();
  Matrix H(d, d);
  Vector e = Vector::Zero(d);
  for (int i = 0; i < d; ++i) {
    e[i] = 1.0;
    H.col(i) = oracle.hvp(w, e);
    e[i] = 0.0;
  }
  return 0.5 * (H + H.transpose());
}

double spherical_sharpness(const oracles::LossOracle& oracle, const Vector& w,
                           const LanczosOptions& opts) {
  const double n2 = w.squaredNorm();
  if (!(n2 > 0.0)) throw std::domain_error("spherical_sharpness: |w| = 0");
  auto apply = [&](const Vector& v) { return oracle.hvp(w, v); };
  const SpectrumResult spec = lanczos_top(apply, oracle.dim(), opts);
  return n2 * spec.lambda1;
}

double eigen_gap(const SpectrumResult& spec) {
  if (!(spec.lambda1 > 0.0)) throw std::invalid_argument("eigen_gap: lambda1 <= 0");
  if (!spec.lambda2 || !spec.lambda_small)
    throw std::invalid_argument("eigen_gap: secondary eigenvalues missing");
  return std::min(spec.lambda1 - *spec.lambda2, *spec.lambda_small) /
         spec.lambda1;
}

double pac_bayes_bound(double lambda1, double m3, double ell_max, long long n,
                       int D, double sigma, double delta) {
  if (n < 2) throw std::domain_error("pac_bayes_bound: n < 2");
  if (D < 1) throw std::domain_error("pac_bayes_bound: D < 1");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::domain_error("pac_bayes_bound: delta outside (0,1)");
  const double ratio = std::log(static_cast<double>(n)) / D;
  if (!(sigma > 0.0) || sigma > 1.0 / (2.0 + 2.0 * std::sqrt(ratio)))
    throw std::domain_error("pac_bayes_bound: sigma above admissible range");
  const double quad = 0.5 * sigma * sigma * lambda1;
  const double cubic =
      (16.0 / 3.0) * sigma * sigma * sigma * m3 * (1.0 + std::pow(ratio, 1.5));
  const double complexity =
      ell_max * std::sqrt((D / (sigma * sigma) +
                           2.0 * std::log(static_cast<double>(n) / delta)) /
                          (static_cast<double>(n) - 1.0));
  return quad + cubic + complexity;
}

}  // namespace eoslab::spectra
