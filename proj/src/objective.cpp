#include "cnmf/objective.hpp"

#include "cnmf/error.hpp"

#include <cmath>
#include <string>

namespace cnmf {

namespace {

void require_same_shape(const CountMatrix& X, const Matrix& Y) {
  if (Y.rows() != X.n_features() || Y.cols() != X.n_columns()) {
    throw DimensionError("X is " + std::to_string(X.n_features()) + " x " + std::to_string(X.n_columns()) +
                         " but Y is " + std::to_string(Y.rows()) + " x " + std::to_string(Y.cols()));
  }
}

void require_model_matches(const CountMatrix& X, const FactorModel& model) {
  model.check_shapes();
  if (model.A.rows() != X.n_features() || model.W.cols() != X.n_columns()) {
    throw DimensionError("model reconstructs " + std::to_string(model.A.rows()) + " x " +
                         std::to_string(model.W.cols()) + " but X is " + std::to_string(X.n_features()) + " x " +
                         std::to_string(X.n_columns()));
  }
}

}  // namespace

double i_divergence(const CountMatrix& X, const Matrix& Y, const DivergenceConfig& cfg) {
  require_same_shape(X, Y);
  double total = 0.0;
  for (Index j = 0; j < Y.cols(); ++j) {
    auto col = X.column(j);
    auto it = col.begin();
    for (Index i = 0; i < Y.rows(); ++i) {
      const double y = Y(i, j);
      if (!(y >= 0.0) || !std::isfinite(y)) {
        throw std::invalid_argument("reconstruction entry (" + std::to_string(i) + ", " + std::to_string(j) +
                                    ") is negative or not finite");
      }
      if (it != col.end() && it->row == i) {
        const double x = it->value;
        total += y - x - x * std::log(std::max(y, cfg.epsilon_floor) / x);
        ++it;
      } else {
        total += y;
      }
    }
  }
  return total;
}

double i_divergence(const CountMatrix& X, const FactorModel& model, const DivergenceConfig& cfg) {
  require_model_matches(X, model);
  ColumnObjective obj(X, model.A, model.b, cfg);
  double total = 0.0;
  for (Index j = 0; j < X.n_columns(); ++j) total += obj.value(j, model.W.col(j));
  return total;
}

Gradients gradients(const CountMatrix& X, const FactorModel& model, const DivergenceConfig& cfg) {
  require_model_matches(X, model);
  const Matrix& A = model.A;
  const Matrix& W = model.W;
  const Index d = A.rows();
  const Index N = W.cols();

  // Dense part from the all-ones term of R, then subtract the sparse X / Y part.
  Gradients g;
  g.A = Vector::Ones(d) * W.rowwise().sum().transpose();
  g.W = A.colwise().sum().transpose() * Vector::Ones(N).transpose();
  g.b = Vector::Constant(d, static_cast<double>(N));

  const Matrix At = A.transpose();
  for (Index j = 0; j < N; ++j) {
    for (const auto& e : X.column(j)) {
      const double y = At.col(e.row).dot(W.col(j)) + model.b(e.row);
      const double q = e.value / std::max(y, cfg.epsilon_floor);
      g.A.row(e.row).noalias() -= q * W.col(j).transpose();
      g.W.col(j).noalias() -= q * At.col(e.row);
      g.b(e.row) -= q;
    }
  }
  return g;
}

double poisson_loglik(const CountMatrix& X, const Matrix& Y) {
  require_same_shape(X, Y);
  double total = -Y.sum();
  for (const auto& e : X.entries()) total += e.value * std::log(Y(e.row, e.col));
  return total;
}

ColumnObjective::ColumnObjective(const CountMatrix& X, const Matrix& A, const Vector& b, DivergenceConfig cfg)
    : X_(&X), At_(A.transpose()), a_colsum_(A.colwise().sum().transpose()), b_(&b), b_sum_(b.sum()), cfg_(cfg) {
  if (A.rows() != X.n_features() || b.size() != X.n_features()) {
    throw DimensionError("phenotype matrix has " + std::to_string(A.rows()) + " rows, bias has " +
                         std::to_string(b.size()) + ", X has " + std::to_string(X.n_features()) + " features");
  }
}

double ColumnObjective::value(Index j, const Eigen::Ref<const Vector>& w) const {
  double total = a_colsum_.dot(w) + b_sum_;
  for (const auto& e : X_->column(j)) {
    const double y = At_.col(e.row).dot(w) + (*b_)(e.row);
    total -= e.value + e.value * std::log(std::max(y, cfg_.epsilon_floor) / e.value);
  }
  return total;
}

double ColumnObjective::value_and_gradient(Index j, const Eigen::Ref<const Vector>& w, Vector& grad) const {
  grad = a_colsum_;
  double total = a_colsum_.dot(w) + b_sum_;
  for (const auto& e : X_->column(j)) {
    const double y = std::max(At_.col(e.row).dot(w) + (*b_)(e.row), cfg_.epsilon_floor);
    total -= e.value + e.value * std::log(y / e.value);
    grad.noalias() -= (e.value / y) * At_.col(e.row);
  }
  return total;
}

}  // namespace cnmf
