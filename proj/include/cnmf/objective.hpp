#pragma once

#include "cnmf/model.hpp"

namespace cnmf {

struct DivergenceConfig {
  // Floor applied to reconstruction entries inside log and ratio terms only.
  double epsilon_floor = 1e-10;
};

/// I-divergence sum_ij y_ij - x_ij - x_ij log(y_ij / x_ij) against an explicit
/// dense reconstruction. Entries with x_ij = 0 contribute y_ij.
double i_divergence(const CountMatrix& X, const Matrix& Y, const DivergenceConfig& cfg = {});

/// Same quantity for Y = A W + b 1^T without forming Y; cost is O(nnz(X) K).
/// This is the objective the solver minimizes.
double i_divergence(const CountMatrix& X, const FactorModel& model, const DivergenceConfig& cfg = {});

struct Gradients {
  Matrix A;  // d x K
  Matrix W;  // K x N
  Vector b;  // d
};

/// Gradients of the I-divergence with R = 1 - X / max(Y, eps):
/// dA = R W^T, dW = A^T R, db = R 1.
Gradients gradients(const CountMatrix& X, const FactorModel& model, const DivergenceConfig& cfg = {});

/// Poisson log-likelihood sum_ij x_ij log y_ij - y_ij without the log-factorial terms.
double poisson_loglik(const CountMatrix& X, const Matrix& Y);

/// Column-separable view of the objective for fixed (A, b). Column j of the
/// divergence depends only on w^(j), so loading sub-problems decompose.
class ColumnObjective {
 public:
  ColumnObjective(const CountMatrix& X, const Matrix& A, const Vector& b, DivergenceConfig cfg = {});

  Index n_columns() const noexcept { return X_->n_columns(); }

  double value(Index j, const Eigen::Ref<const Vector>& w) const;
  double value_and_gradient(Index j, const Eigen::Ref<const Vector>& w, Vector& grad) const;

 private:
  const CountMatrix* X_;
  Matrix At_;          // K x d, rows of A as contiguous columns
  Vector a_colsum_;    // K
  const Vector* b_;
  double b_sum_;
  DivergenceConfig cfg_;
};

}  // namespace cnmf
