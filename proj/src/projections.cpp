#include "cnmf/projections.hpp"

#include "cnmf/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace cnmf {

namespace {
// Rounding in the threshold step leaves the output sum a few ulps of the
// largest input away from lambda; anything this close counts as on the simplex.
constexpr double kFeasibleSumSlack = 1e-11;
}  // namespace

ScaledSimplex::ScaledSimplex(Index dimension, double lambda) : dimension(dimension), lambda(lambda) {
  if (dimension < 1) throw std::invalid_argument("simplex dimension must be at least 1");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("simplex scale must be positive");
}

Vector project_scaled_simplex(const Eigen::Ref<const Vector>& v, const ScaledSimplex& simplex) {
  if (v.size() != simplex.dimension) {
    throw DimensionError("vector of length " + std::to_string(v.size()) + " projected onto simplex of dimension " +
                         std::to_string(simplex.dimension));
  }
  const double lambda = simplex.lambda;
  const Index d = v.size();

  if (v.minCoeff() >= 0.0) {
    if (std::abs(v.sum() - lambda) <= kFeasibleSumSlack * std::max(1.0, lambda)) return v;
  }

  std::vector<Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return v(a) > v(b); });

  // Largest rho with v_(rho) > (sum_{i<=rho} v_(i) - lambda) / rho.
  double prefix = 0.0;
  double theta = 0.0;
  for (Index r = 0; r < d; ++r) {
    prefix += v(order[static_cast<std::size_t>(r)]);
    const double candidate = (prefix - lambda) / static_cast<double>(r + 1);
    if (v(order[static_cast<std::size_t>(r)]) > candidate) theta = candidate;
  }
  return (v.array() - theta).max(0.0).matrix();
}

Vector project_box_support(const Eigen::Ref<const Vector>& w, std::span<const Index> support) {
  Vector out = Vector::Zero(w.size());
  for (Index k : support) {
    if (k < 0 || k >= w.size()) {
      throw DimensionError("support index " + std::to_string(k) + " outside [0, " + std::to_string(w.size()) + ")");
    }
    out(k) = std::clamp(w(k), 0.0, 1.0);
  }
  return out;
}

Vector project_nonneg(const Eigen::Ref<const Vector>& v) { return v.cwiseMax(0.0); }

}  // namespace cnmf
