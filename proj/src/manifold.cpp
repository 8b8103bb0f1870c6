#include "manifold.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

namespace eoslab::manifold {

namespace {

Vector normalized(const Vector& v) {
  const double n = v.norm();
  if (!(n > 0.0)) throw std::domain_error("cannot normalize zero vector");
  return v / n;
}

// Null-space columns (indices >= rank) of a dense spectrum.
const Matrix& full_basis_or_throw(const ManifoldPoint& point) {
  if (!point.spectrum.full_basis)
    throw std::invalid_argument(
        "operation needs a dense spectrum at the manifold point");
  return *point.spectrum.full_basis;
}

void check_rank_gap(const ManifoldPoint& point, int rank, double gap_tol) {
  const Vector& evals = *point.spectrum.full_evals;
  if (rank < 1 || rank >= evals.size())
    throw std::invalid_argument("rank outside (0, dim)");
  const double lam1 = std::max(std::abs(evals[0]), 1e-300);
  if ((evals[rank - 1] - evals[rank]) / lam1 < gap_tol)
    throw std::invalid_argument(
        "eigen-gap too small to separate the Hessian null space");
}

}  // namespace

ManifoldPoint gf_project(const Vector& theta, const oracles::LossOracle& oracle,
                         const ProjectOptions& opts) {
  Vector phi = normalized(theta);
  long it = 0;
  double loss = oracle.value(phi);
  while (loss > opts.loss_tol) {
    if (it >= opts.max_inner_steps)
      throw NoConvergenceError("gf_project: loss " + std::to_string(loss) +
                                   " above tolerance after " +
                                   std::to_string(it) + " inner steps",
                               loss, loss);
    phi = normalized(phi - opts.inner_lr * oracle.grad(phi));
    loss = oracle.value(phi);
    ++it;
  }
  ManifoldPoint point;
  point.phi = std::move(phi);
  point.loss = loss;
  point.rank = opts.rank;
  if (!opts.skip_spectrum) {
    if (oracle.dim() <= opts.dense_dim_threshold) {
      point.spectrum =
          spectra::dense_spectrum(spectra::dense_hessian(oracle, point.phi),
                                  opts.rank);
    } else {
      auto apply = [&](const Vector& v) { return oracle.hvp(point.phi, v); };
      point.spectrum = spectra::lanczos_top(apply, oracle.dim(), opts.lanczos);
    }
    point.mu = 2.0 / point.spectrum.lambda1;
  }
  return point;
}

Vector tangent_project(const ManifoldPoint& point, const Vector& v, int rank,
                       double gap_tol) {
  const Matrix& B = full_basis_or_throw(point);
  check_rank_gap(point, rank, gap_tol);
  const auto null_cols = B.cols() - rank;
  const auto N = B.rightCols(null_cols);
  Vector p0v = N * (N.transpose() * v);
  return p0v - point.phi.dot(p0v) * point.phi;
}

Matrix tangent_basis(const ManifoldPoint& point, int rank) {
  const Matrix& B = full_basis_or_throw(point);
  const auto null_cols = B.cols() - rank;
  Matrix A = B.rightCols(null_cols);
  A -= point.phi * (point.phi.transpose() * A);
  // Thin QR; drop the rank-deficient column left behind by removing phi.
  Eigen::ColPivHouseholderQR<Matrix> qr(A);
  const auto r = qr.rank();
  Matrix Q = qr.householderQ() * Matrix::Identity(A.rows(), r);
  return Q;
}

Vector grad_log_sharpness(const ManifoldPoint& point,
                          const oracles::LossOracle& oracle,
                          const GradLogSharpOptions& opts) {
  if (!point.spectrum.top_eigen_unique)
    throw std::invalid_argument("grad_log_sharpness: top eigenvalue not unique");
  if (!point.rank)
    throw std::invalid_argument("grad_log_sharpness: manifold rank not set");
  const int rank = *point.rank;
  check_rank_gap(point, rank, opts.gap_tol);
  const Matrix basis = tangent_basis(point, rank);
  Vector g = Vector::Zero(point.phi.size());
  for (Eigen::Index i = 0; i < basis.cols(); ++i) {
    double lam[2];
    for (int side = 0; side < 2; ++side) {
      const double sgn = side == 0 ? 1.0 : -1.0;
      Vector probe = point.phi + sgn * opts.fd_step * basis.col(i);
      ManifoldPoint p;
      try {
        p = gf_project(probe, oracle, opts.proj);
      } catch (const NoConvergenceError& e) {
        throw NoConvergenceError(
            "grad_log_sharpness: FD probe left the projection basin: " +
                std::string(e.what()),
            e.best_estimate, e.residual);
      }
      lam[side] = p.spectrum.lambda1;
    }
    g += (std::log(lam[0]) - std::log(lam[1])) / (2.0 * opts.fd_step) *
         basis.col(i);
  }
  return g;
}

Vector grad_log_sharpness_linreg(const oracles::LinRegBNProblem& problem,
                                 const ManifoldPoint& point) {
  const Vector& w = point.phi;
  const Vector Sw = problem.input_cov() * w;
  const Vector ambient = 2.0 * w / w.squaredNorm() - 2.0 * Sw / w.dot(Sw);
  return tangent_project(point, ambient, linreg_hessian_rank(problem));
}

FlowState flow_step(const FlowState& state, double dtau,
                    const oracles::LossOracle& oracle,
                    const FlowOptions& opts) {
  if (!opts.grad) throw std::invalid_argument("flow_step: tangent gradient missing");
  if (!(state.c_b > 0.0)) throw std::invalid_argument("flow_step: c_b <= 0");
  auto rhs = [&](const Vector& z) {
    const ManifoldPoint p = gf_project(z, oracle, opts.proj);
    const Vector g = opts.grad(p);
    return Vector(-g / (4.0 + (2.0 / state.c_b) * g.squaredNorm()));
  };
  const Vector& z0 = state.zeta;
  const Vector k1 = rhs(z0);
  const Vector k2 = rhs(z0 + 0.5 * dtau * k1);
  const Vector k3 = rhs(z0 + 0.5 * dtau * k2);
  const Vector k4 = rhs(z0 + dtau * k3);
  const Vector z1 = z0 + (dtau / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  FlowState next = state;
  next.zeta = gf_project(z1, oracle, opts.proj).phi;
  next.tau = state.tau + dtau;
  return next;
}

std::vector<FlowSample> run_flow(
    FlowState init, double dtau, long steps, const oracles::LossOracle& oracle,
    const FlowOptions& opts, const std::function<bool(const FlowSample&)>& stop) {
  std::vector<FlowSample> samples;
  samples.reserve(steps + 1);
  FlowState s = std::move(init);
  auto sample_at = [&](const FlowState& st) {
    const ManifoldPoint p = gf_project(st.zeta, oracle, opts.proj);
    const Vector g = opts.grad(p);
    return FlowSample{st.tau, p.phi, p.spectrum.lambda1, g.norm()};
  };
  samples.push_back(sample_at(s));
  if (stop && stop(samples.back())) return samples;
  for (long i = 0; i < steps; ++i) {
    s = flow_step(s, dtau, oracle, opts);
    samples.push_back(sample_at(s));
    if (stop && stop(samples.back())) break;
  }
  return samples;
}

DriftObservables extract_observables(const Vector& theta, double v_tilde,
                                     double eta, const ManifoldPoint& point,
                                     const Vector* v1_ref) {
  DriftObservables obs;
  obs.x = theta - point.phi;
  Vector v1 = point.spectrum.v1;
  if (v1_ref) {
    if (v1.dot(*v1_ref) < 0.0) v1 = -v1;
  } else {
    Eigen::Index imax = 0;
    v1.cwiseAbs().maxCoeff(&imax);
    if (v1[imax] < 0.0) v1 = -v1;
  }
  obs.h = obs.x.dot(v1);
  obs.h_scaled = eta != 0.0 ? obs.h / eta : 0.0;
  obs.u = eta != 0.0 ? (point.mu * point.mu * v_tilde - 1.0) / eta : 0.0;
  obs.v1 = v1;
  if (point.spectrum.full_basis && point.rank) {
    const Matrix& B = *point.spectrum.full_basis;
    const auto N = B.rightCols(B.cols() - *point.rank);
    const Vector p0x = N * (N.transpose() * obs.x);
    obs.p0_residual = p0x.norm();
    obs.misalignment = (obs.x - obs.h * v1 - p0x).norm();
  }
  return obs;
}

std::pair<Vector, double> min_norm_solution(const Matrix& X, const Vector& y) {
  const auto n = X.rows();
  if (n < 1 || y.size() != n)
    throw std::invalid_argument("min_norm_solution: bad shapes");
  const Vector mu_x = X.colwise().mean();
  const Matrix Xc = X.rowwise() - mu_x.transpose();
  const double mu_y = y.mean();
  const Vector yc = y.array() - mu_y;
  // w* = Xc' (Xc Xc')^+ yc, the least-norm solution of Xc w = yc.
  Eigen::JacobiSVD<Matrix> svd(Xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-12);
  const Vector w = svd.solve(yc);
  const double scale = std::max(1.0, yc.cwiseAbs().maxCoeff());
  if ((Xc * w - yc).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw std::invalid_argument(
        "min_norm_solution: targets not in the row space (infeasible)");
  return {w, mu_y - w.dot(mu_x)};
}

std::pair<Vector, double> min_norm_oracle(const oracles::LinRegBNProblem& p) {
  return min_norm_solution(p.inputs(), p.targets());
}

Matrix linreg_hessian_on_manifold(const oracles::LinRegBNProblem& p,
                                  const Vector& w, double membership_tol) {
  const auto [wt, bt] = p.coefficients(w);
  const Vector r = (p.inputs() * wt).array() + bt - p.targets().array();
  if (r.cwiseAbs().maxCoeff() > membership_tol)
    throw std::invalid_argument(
        "linreg_hessian_on_manifold: point is off the minimizer manifold");
  const Vector& z = p.z_vector();
  return 2.0 * wt.squaredNorm() * (p.input_cov() - z * z.transpose());
}

int linreg_hessian_rank(const oracles::LinRegBNProblem& p) {
  const Matrix Xc =
      p.inputs().rowwise() - p.input_mean().transpose();
  Eigen::JacobiSVD<Matrix> svd(Xc);
  const double cutoff = 1e-10 * svd.singularValues()[0];
  int r = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > cutoff) ++r;
  return r - 1;
}

Vector linreg_manifold_point(const oracles::LinRegBNProblem& p, Rng& rng,
                             double spread) {
  const Vector wstar = min_norm_oracle(p).first;
  const Matrix Xc = p.inputs().rowwise() - p.input_mean().transpose();
  Eigen::JacobiSVD<Matrix> svd(Xc, Eigen::ComputeFullV);
  const double cutoff = 1e-10 * svd.singularValues()[0];
  int r = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > cutoff) ++r;
  const auto null_dim = Xc.cols() - r;
  if (null_dim <= 0) return normalized(wstar);
  const Matrix N = svd.matrixV().rightCols(null_dim);
  const Vector nu = N * rng.gaussian_vector(static_cast<int>(null_dim)) * spread;
  return normalized(wstar + nu);
}

}  // namespace eoslab::manifold
