#include "cnmf/logreg.hpp"

#include "cnmf/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cnmf {

namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }
double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

class Problem {
 public:
  Problem(const Matrix& X, std::span<const int> y, Penalty penalty, double strength)
      : X_(X), y_(static_cast<Index>(y.size())), penalty_(penalty), strength_(strength) {
    for (Index i = 0; i < y_.size(); ++i) y_(i) = y[static_cast<std::size_t>(i)];
  }

  Index dim() const { return X_.cols() + 1; }  // weights then intercept

  // Smooth part: mean logistic loss plus the l2 term when applicable.
  double smooth(const Vector& theta, Vector* grad) const {
    const auto w = theta.head(X_.cols());
    const double c = theta(X_.cols());
    const Vector z = (X_ * w).array() + c;
    const double n = static_cast<double>(X_.rows());
    double loss = 0.0;
    for (Index i = 0; i < z.size(); ++i) loss += softplus(z(i)) - y_(i) * z(i);
    loss /= n;
    if (penalty_ == Penalty::l2) loss += 0.5 * strength_ * w.squaredNorm();
    if (grad) {
      Vector r(z.size());
      for (Index i = 0; i < z.size(); ++i) r(i) = (sigmoid(z(i)) - y_(i)) / n;
      grad->resize(dim());
      grad->head(X_.cols()).noalias() = X_.transpose() * r;
      (*grad)(X_.cols()) = r.sum();
      if (penalty_ == Penalty::l2) grad->head(X_.cols()) += strength_ * w;
    }
    return loss;
  }

  double nonsmooth(const Vector& theta) const {
    return penalty_ == Penalty::l1 ? strength_ * theta.head(X_.cols()).lpNorm<1>() : 0.0;
  }

  Vector prox(const Vector& v, double step) const {
    Vector out = v;
    if (penalty_ == Penalty::l1) {
      const double thr = step * strength_;
      for (Index k = 0; k < X_.cols(); ++k) {
        const double a = std::abs(v(k)) - thr;
        out(k) = a > 0.0 ? std::copysign(a, v(k)) : 0.0;
      }
    }
    return out;
  }

  // Rough lower estimate of the smooth part's Lipschitz constant.
  double lipschitz_guess() const {
    Vector v = Vector::Ones(dim()) / std::sqrt(static_cast<double>(dim()));
    double s = 1.0;
    for (int it = 0; it < 20; ++it) {
      Vector xv = (X_ * v.head(X_.cols())).array() + v(X_.cols());
      Vector u(dim());
      u.head(X_.cols()) = X_.transpose() * xv;
      u(X_.cols()) = xv.sum();
      s = u.norm();
      if (s == 0.0) return 1.0;
      v = u / s;
    }
    double L = 0.25 * s / static_cast<double>(X_.rows());
    if (penalty_ == Penalty::l2) L += strength_;
    return std::max(L, 1e-8);
  }

 private:
  const Matrix& X_;
  Vector y_;
  Penalty penalty_;
  double strength_;
};

}  // namespace

Vector LogRegModel::decision(const Matrix& features) const {
  if (features.cols() != weights.size()) throw DimensionError("feature count does not match the classifier");
  return (features * weights).array() + intercept;
}

LogRegModel fit_logreg(const Matrix& features, std::span<const int> labels, Penalty penalty, double strength,
                       const LogRegOptions& options) {
  if (static_cast<Index>(labels.size()) != features.rows()) {
    throw DimensionError("labels and feature rows differ in count");
  }
  if (!features.allFinite()) throw std::invalid_argument("features must be finite");
  const auto positives = std::count(labels.begin(), labels.end(), 1);
  if (positives == 0 || positives == static_cast<long>(labels.size())) {
    throw std::invalid_argument("logistic regression needs both classes in the training data");
  }
  if (!(strength >= 0.0)) throw std::invalid_argument("regularization strength must be non-negative");

  const Problem prob(features, labels, penalty, strength);
  double L = prob.lipschitz_guess();
  Vector x = Vector::Zero(prob.dim());
  Vector y = x;
  Vector grad, grad_x;
  double t = 1.0;
  double objective = prob.smooth(x, nullptr) + prob.nonsmooth(x);

  LogRegModel model;
  model.strength = strength;
  for (int it = 1; it <= options.max_iters; ++it) {
    const double fy = prob.smooth(y, &grad);
    Vector x_new;
    for (;;) {
      x_new = prob.prox(y - grad / L, 1.0 / L);
      const Vector diff = x_new - y;
      if (prob.smooth(x_new, nullptr) <= fy + grad.dot(diff) + 0.5 * L * diff.squaredNorm() + 1e-15 * std::abs(fy)) break;
      L *= 2.0;
    }
    const double obj_new = prob.smooth(x_new, &grad_x) + prob.nonsmooth(x_new);
    model.iterations = it;

    // Stationarity of the new iterate through its proximal gradient mapping.
    const double mapping = L * (x_new - prob.prox(x_new - grad_x / L, 1.0 / L)).norm();
    if (obj_new > objective) {
      t = 1.0;  // adaptive restart
      y = x;
      continue;
    }
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = x_new + ((t - 1.0) / t_new) * (x_new - x);
    x = std::move(x_new);
    t = t_new;
    objective = obj_new;
    if (mapping < options.grad_tol) {
      model.converged = true;
      break;
    }
  }
  model.weights = x.head(features.cols());
  model.intercept = x(features.cols());
  return model;
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DimensionError("scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double pos_rank_sum = 0.0;
  double n_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        pos_rank_sum += avg_rank;
        n_pos += 1.0;
      }
    }
    i = j;
  }
  const double n_neg = static_cast<double>(scores.size()) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) throw std::invalid_argument("AUROC needs both classes");
  return (pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

}  // namespace cnmf
