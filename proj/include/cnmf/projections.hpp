#pragma once

#include "cnmf/model.hpp"

#include <span>

namespace cnmf {

/// The set lambda * Delta^{d-1} = {u >= 0 : sum(u) = lambda}.
struct ScaledSimplex {
  Index dimension;
  double lambda;

  ScaledSimplex(Index dimension, double lambda);
};

/// Euclidean projection onto the scaled simplex by sort-and-threshold.
/// Inputs that are already feasible (non-negative, summing to lambda within
/// 1e-11 relative) are returned unchanged, which makes the map idempotent bit for bit.
Vector project_scaled_simplex(const Eigen::Ref<const Vector>& v, const ScaledSimplex& simplex);
inline Vector project_scaled_simplex(const Eigen::Ref<const Vector>& v, double lambda) {
  return project_scaled_simplex(v, ScaledSimplex(v.size(), lambda));
}

/// Euclidean projection onto {w in [0,1]^K : supp(w) within `support`}.
/// Entries outside the support are set to exactly 0.
Vector project_box_support(const Eigen::Ref<const Vector>& w, std::span<const Index> support);

Vector project_nonneg(const Eigen::Ref<const Vector>& v);

}  // namespace cnmf
