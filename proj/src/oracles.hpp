#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "common.hpp"

namespace eoslab::oracles {

/// A scale-invariant loss over a flat parameter vector: L(c*w) = L(w) for all
/// c > 0. Implementations provide the value and the analytic gradient; the
/// Hessian-vector product defaults to a central finite difference of the
/// gradient, which is accurate enough for the spectral tools here and keeps
/// the oracles free of autodiff machinery.
///
/// Evaluation is pure and const; oracles are safe to share between threads.
class LossOracle {
 public:
  virtual ~LossOracle() = default;

  virtual int dim() const = 0;
  virtual double value(const Vector& w) const = 0;
  virtual Vector grad(const Vector& w) const = 0;

  /// H(w) v. Default: central FD of grad with step fd_step * |w| / |v|.
  virtual Vector hvp(const Vector& w, const Vector& v) const;

  virtual bool has_test_value() const { return false; }
  virtual double test_value(const Vector& /*w*/) const {
    throw std::logic_error("oracle has no held-out metric");
  }

  double fd_step() const { return fd_step_; }

 protected:
  double fd_step_ = 1e-5;
};

/// Central finite difference of `value`; independent of any analytic gradient.
Vector fd_grad(const LossOracle& oracle, const Vector& w, double step);

/// Central finite difference of `fn`.
Vector fd_grad(const std::function<double(const Vector&)>& fn, const Vector& w,
               double step);

/// Central finite difference of the oracle's gradient along v (one more FD
/// layer than LossOracle::hvp when that override is analytic).
Vector fd_hvp(const LossOracle& oracle, const Vector& w, const Vector& v,
              double step);

/// Linear regression with batch normalization on the output. The model is
/// Phi(x; w) = wt' x + bt with wt = sigma_y * w / |w|_Sx and
/// bt = mu_y - wt' mu_x, so the loss mean over the training set is
/// scale-invariant in w.
class LinRegBNProblem final : public LossOracle {
 public:
  /// X is n x d (rows are inputs). Requires n >= 2 and non-constant targets.
  LinRegBNProblem(Matrix X, Vector y, Matrix X_test, Vector y_test);

  int dim() const override { return static_cast<int>(X_.cols()); }
  double value(const Vector& w) const override;
  Vector grad(const Vector& w) const override;
  bool has_test_value() const override { return X_test_.rows() > 0; }
  double test_value(const Vector& w) const override;

  int n_train() const { return static_cast<int>(X_.rows()); }
  const Matrix& inputs() const { return X_; }
  const Vector& targets() const { return y_; }
  const Vector& input_mean() const { return mu_x_; }
  const Matrix& input_cov() const { return Sigma_x_; }
  double target_mean() const { return mu_y_; }
  double target_std() const { return sigma_y_; }
  /// z = (1/n) sum_i q_i (x_i - mu_x) with q_i = (y_i - mu_y)/sigma_y.
  const Vector& z_vector() const { return z_; }

  /// |w|_Sx = sqrt(w' Sigma_x w), evaluated through the centered data matrix.
  double sigma_norm(const Vector& w) const;
  /// Normalized coefficients (wt, bt) of the equivalent plain linear model.
  std::pair<Vector, double> coefficients(const Vector& w) const;

 private:
  Matrix X_, X_test_;
  Vector y_, y_test_;
  Matrix Xc_;       // centered inputs
  Vector yc_;       // centered targets
  Vector mu_x_;
  Matrix Sigma_x_;  // (1/n) Xc' Xc
  double mu_y_ = 0.0, sigma_y_ = 0.0;
  Vector z_;
};

/// Overparameterized matrix completion with batch normalization over the
/// observed entries (no mean subtraction). Parameters are (U, V), each d x d,
/// flattened row-major as [U; V]; the model output at (i,j) is
/// (gamma/sigma) [U V']_{ij} with sigma^2 the second moment of [U V'] over
/// the observed set and gamma fixed from the observed targets.
class MatComBNProblem final : public LossOracle {
 public:
  MatComBNProblem(Matrix M, std::vector<std::pair<int, int>> observed);

  int dim() const override { return 2 * d_ * d_; }
  double value(const Vector& params) const override;
  Vector grad(const Vector& params) const override;
  bool has_test_value() const override { return true; }
  /// Mean squared error over all d^2 entries, using the training-batch sigma.
  double test_value(const Vector& params) const override;

  int matrix_dim() const { return d_; }
  int n_observed() const { return static_cast<int>(obs_.size()); }
  double gamma() const { return gamma_; }
  const Matrix& ground_truth() const { return M_; }
  const std::vector<std::pair<int, int>>& observed() const { return obs_; }

  /// U V' for the given flat parameters (pre-normalization product).
  Matrix product(const Vector& params) const;
  double batch_sigma(const Vector& params) const;

 private:
  struct Views {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>
        U, V;
  };
  Views views(const Vector& params) const;

  Matrix M_;
  std::vector<std::pair<int, int>> obs_;
  int d_ = 0;
  double gamma_ = 0.0;
};

/// The 3-D warm-up loss L(w) = F(Q w) with
/// F(x,y,z) = 2 - (x+y)/sqrt(x^2 - x y + y^2); scale-invariant, minimized on
/// the half-plane x = y > 0, singular on the line x = y = 0.
class Example3DProblem final : public LossOracle {
 public:
  explicit Example3DProblem(Matrix Q = Matrix::Identity(3, 3));

  int dim() const override { return 3; }
  double value(const Vector& w) const override;
  Vector grad(const Vector& w) const override;

  const Matrix& transform() const { return Q_; }
  /// The flattest minimizer Q' (1,1,0)/sqrt(2).
  Vector flattest_point() const;

 private:
  Matrix Q_;
};

}  // namespace eoslab::oracles
