#include "oracles.hpp"

#include <functional>

namespace eoslab::oracles {

Vector LossOracle::hvp(const Vector& w, const Vector& v) const {
  const double vn = v.norm();
  if (vn == 0.0) return Vector::Zero(dim());
  const double h = fd_step_ * w.norm() / vn;
  if (!(h > 0.0)) throw std::domain_error("hvp: zero base point");
  return (grad(w + h * v) - grad(w - h * v)) / (2.0 * h);
}

Vector fd_grad(const std::function<double(const Vector&)>& fn, const Vector& w,
               double step) {
  Vector g(w.size());
  Vector e = w;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double wi = w[i];
    e[i] = wi + step;
    const double fp = fn(e);
    e[i] = wi - step;
    const double fm = fn(e);
    e[i] = wi;
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

Vector fd_grad(const LossOracle& oracle, const Vector& w, double step) {
  return fd_grad([&](const Vector& x) { return oracle.value(x); }, w, step);
}

Vector fd_hvp(const LossOracle& oracle, const Vector& w, const Vector& v,
              double step) {
  const double vn = v.norm();
  if (vn == 0.0) return Vector::Zero(oracle.dim());
  const double h = step * w.norm() / vn;
  return (oracle.grad(w + h * v) - oracle.grad(w - h * v)) / (2.0 * h);
}

// ---------------------------------------------------------------------------
// Linear regression with BN

LinRegBNProblem::LinRegBNProblem(Matrix X, Vector y, Matrix X_test,
                                 Vector y_test)
    : X_(std::move(X)),
      X_test_(std::move(X_test)),
      y_(std::move(y)),
      y_test_(std::move(y_test)) {
  const auto n = X_.rows();
  if (n < 2) throw std::invalid_argument("linreg: need at least 2 samples");
  if (y_.size() != n) throw std::invalid_argument("linreg: X/y size mismatch");
  if (X_test_.rows() != y_test_.size())
    throw std::invalid_argument("linreg: test X/y size mismatch");
  mu_x_ = X_.colwise().mean();
  Xc_ = X_.rowwise() - mu_x_.transpose();
  mu_y_ = y_.mean();
  yc_ = y_.array() - mu_y_;
  sigma_y_ = std::sqrt(yc_.squaredNorm() / static_cast<double>(n));
  if (!(sigma_y_ > 0.0))
    throw std::invalid_argument("linreg: constant targets (sigma_y = 0)");
  Sigma_x_ = Xc_.transpose() * Xc_ / static_cast<double>(n);
  z_ = Xc_.transpose() * (yc_ / sigma_y_) / static_cast<double>(n);
}

double LinRegBNProblem::sigma_norm(const Vector& w) const {
  // w' Sigma_x w == |Xc w|^2 / n; the data-matrix route keeps value/grad/norm
  // mutually consistent in floating point.
  return std::sqrt((Xc_ * w).squaredNorm() / static_cast<double>(X_.rows()));
}

std::pair<Vector, double> LinRegBNProblem::coefficients(const Vector& w) const {
  const double s = sigma_norm(w);
  if (!(s > 0.0)) throw std::domain_error("linreg: degenerate direction |w|_Sx = 0");
  Vector wt = (sigma_y_ / s) * w;
  return {wt, mu_y_ - wt.dot(mu_x_)};
}

double LinRegBNProblem::value(const Vector& w) const {
  const auto n = static_cast<double>(X_.rows());
  const double s = sigma_norm(w);
  if (!(s > 0.0)) throw std::domain_error("linreg: degenerate direction |w|_Sx = 0");
  const Vector r = (sigma_y_ / s) * (Xc_ * w) - yc_;
  return r.squaredNorm() / n;
}

Vector LinRegBNProblem::grad(const Vector& w) const {
  const auto n = static_cast<double>(X_.rows());
  const Vector Xw = Xc_ * w;
  const double s2 = Xw.squaredNorm() / n;
  if (!(s2 > 0.0)) throw std::domain_error("linreg: degenerate direction |w|_Sx = 0");
  const double s = std::sqrt(s2);
  const Vector r = (sigma_y_ / s) * Xw - yc_;
  const Vector m = Xc_.transpose() * r / n;
  const Vector Sw = Xc_.transpose() * Xw / n;
  return (2.0 * sigma_y_ / s) * (m - (w.dot(m) / s2) * Sw);
}

double LinRegBNProblem::test_value(const Vector& w) const {
  if (X_test_.rows() == 0) throw std::logic_error("linreg: no held-out set");
  auto [wt, bt] = coefficients(w);
  const Vector r = (X_test_ * wt).array() + bt - y_test_.array();
  return r.squaredNorm() / static_cast<double>(X_test_.rows());
}

// ---------------------------------------------------------------------------
// Matrix completion with BN

MatComBNProblem::MatComBNProblem(Matrix M,
                                 std::vector<std::pair<int, int>> observed)
    : M_(std::move(M)), obs_(std::move(observed)) {
  d_ = static_cast<int>(M_.rows());
  if (M_.cols() != d_) throw std::invalid_argument("matcom: M must be square");
  if (obs_.empty()) throw std::invalid_argument("matcom: empty observation set");
  double s = 0.0;
  for (auto [i, j] : obs_) {
    if (i < 0 || i >= d_ || j < 0 || j >= d_)
      throw std::invalid_argument("matcom: observation index out of range");
    s += M_(i, j) * M_(i, j);
  }
  gamma_ = std::sqrt(s / static_cast<double>(obs_.size()));
  if (!(gamma_ > 0.0))
    throw std::invalid_argument("matcom: observed entries are all zero");
}

MatComBNProblem::Views MatComBNProblem::views(const Vector& params) const {
  if (params.size() != dim())
    throw std::invalid_argument("matcom: wrong parameter size");
  using RowMat =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Views{Eigen::Map<const RowMat>(params.data(), d_, d_),
               Eigen::Map<const RowMat>(params.data() + d_ * d_, d_, d_)};
}

Matrix MatComBNProblem::product(const Vector& params) const {
  auto v = views(params);
  return v.U * v.V.transpose();
}

double MatComBNProblem::batch_sigma(const Vector& params) const {
  auto v = views(params);
  const auto N = static_cast<double>(obs_.size());
  double s2 = 0.0;
  for (auto [i, j] : obs_) {
    const double p = v.U.row(i).dot(v.V.row(j));
    s2 += p * p;
  }
  return std::sqrt(s2 / N);
}

double MatComBNProblem::value(const Vector& params) const {
  auto v = views(params);
  const auto N = static_cast<double>(obs_.size());
  double s2 = 0.0;
  std::vector<double> p(obs_.size());
  for (std::size_t k = 0; k < obs_.size(); ++k) {
    p[k] = v.U.row(obs_[k].first).dot(v.V.row(obs_[k].second));
    s2 += p[k] * p[k];
  }
  s2 /= N;
  if (!(s2 > 0.0)) throw std::domain_error("matcom: batch sigma = 0");
  const double a = gamma_ / std::sqrt(s2);
  double loss = 0.0;
  for (std::size_t k = 0; k < obs_.size(); ++k) {
    const double e = a * p[k] - M_(obs_[k].first, obs_[k].second);
    loss += e * e;
  }
  return loss / N;
}

Vector MatComBNProblem::grad(const Vector& params) const {
  auto v = views(params);
  const auto N = static_cast<double>(obs_.size());
  std::vector<double> p(obs_.size()), e(obs_.size());
  double s2 = 0.0;
  for (std::size_t k = 0; k < obs_.size(); ++k) {
    p[k] = v.U.row(obs_[k].first).dot(v.V.row(obs_[k].second));
    s2 += p[k] * p[k];
  }
  s2 /= N;
  if (!(s2 > 0.0)) throw std::domain_error("matcom: batch sigma = 0");
  const double a = gamma_ / std::sqrt(s2);
  double c = 0.0;
  for (std::size_t k = 0; k < obs_.size(); ++k) {
    e[k] = a * p[k] - M_(obs_[k].first, obs_[k].second);
    c += e[k] * p[k];
  }
  c /= N;
  // dL/dP_{ij} = (2a/N) (e_{ij} - (c/s2) p_{ij}) on observed entries.
  Vector g = Vector::Zero(dim());
  using RowMat =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<RowMat> gU(g.data(), d_, d_);
  Eigen::Map<RowMat> gV(g.data() + d_ * d_, d_, d_);
  const double scale = 2.0 * a / N;
  for (std::size_t k = 0; k < obs_.size(); ++k) {
    const auto [i, j] = obs_[k];
    const double coef = scale * (e[k] - (c / s2) * p[k]);
    gU.row(i) += coef * v.V.row(j);
    gV.row(j) += coef * v.U.row(i);
  }
  return g;
}

double MatComBNProblem::test_value(const Vector& params) const {
  auto v = views(params);
  const double sigma = batch_sigma(params);
  if (!(sigma > 0.0)) throw std::domain_error("matcom: batch sigma = 0");
  const double a = gamma_ / sigma;
  const Matrix P = v.U * v.V.transpose();
  return ((a * P - M_).squaredNorm()) / static_cast<double>(d_ * d_);
}

// ---------------------------------------------------------------------------
// 3-D example

Example3DProblem::Example3DProblem(Matrix Q) : Q_(std::move(Q)) {
  if (Q_.rows() != 3 || Q_.cols() != 3)
    throw std::invalid_argument("example3d: Q must be 3x3");
  if ((Q_.transpose() * Q_ - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() >
      1e-12)
    throw std::invalid_argument("example3d: Q is not orthogonal");
}

namespace {
double s_squared(double x, double y) { return x * x - x * y + y * y; }
}  // namespace

double Example3DProblem::value(const Vector& w) const {
  if (w.size() != 3) throw std::invalid_argument("example3d: dim 3 expected");
  const Vector u = Q_ * w;
  const double s2 = s_squared(u[0], u[1]);
  if (!(s2 > 0.0)) throw std::domain_error("example3d: singular line x = y = 0");
  return 2.0 - (u[0] + u[1]) / std::sqrt(s2);
}

Vector Example3DProblem::grad(const Vector& w) const {
  if (w.size() != 3) throw std::invalid_argument("example3d: dim 3 expected");
  const Vector u = Q_ * w;
  const double x = u[0], y = u[1];
  const double s2 = s_squared(x, y);
  if (!(s2 > 0.0)) throw std::domain_error("example3d: singular line x = y = 0");
  const double s3 = s2 * std::sqrt(s2);
  Vector g(3);
  g[0] = 1.5 * y * (x - y) / s3;
  g[1] = 1.5 * x * (y - x) / s3;
  g[2] = 0.0;
  return Q_.transpose() * g;
}

Vector Example3DProblem::flattest_point() const {
  Vector z(3);
  z << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0), 0.0;
  return Q_.transpose() * z;
}

}  // namespace eoslab::oracles
