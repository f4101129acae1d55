#pragma once

// Slow, independent reference implementations used only by the tests.

#include "cnmf/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace oracle {

using cnmf::Index;
using cnmf::Vector;

// Projection onto {u >= 0, sum u = lambda} by enumerating every support set:
// on a fixed support S the equality-constrained least squares solution is
// u_S = v_S - (sum v_S - lambda) / |S|. The feasible candidate closest to v wins.
inline Vector simplex_projection(const Vector& v, double lambda) {
  const Index d = v.size();
  Vector best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (unsigned long mask = 1; mask < (1ul << d); ++mask) {
    double sum = 0.0;
    int count = 0;
    for (Index i = 0; i < d; ++i) {
      if (mask >> i & 1) {
        sum += v(i);
        ++count;
      }
    }
    const double shift = (sum - lambda) / count;
    Vector u = Vector::Zero(d);
    bool feasible = true;
    for (Index i = 0; i < d; ++i) {
      if (!(mask >> i & 1)) continue;
      u(i) = v(i) - shift;
      if (u(i) < 0.0) feasible = false;
    }
    if (!feasible) continue;
    const double dist = (u - v).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = u;
    }
  }
  return best;
}

// Fraction of (positive, negative) pairs ranked correctly, ties counting one half.
inline double pairwise_auroc(std::span<const double> scores, std::span<const int> labels) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

inline double cosine(const Vector& a, const Vector& b) {
  const double na = a.norm(), nb = b.norm();
  return na == 0.0 || nb == 0.0 ? 0.0 : a.dot(b) / (na * nb);
}

}  // namespace oracle
