#pragma once

#include "cnmf/model.hpp"
#include "cnmf/solver.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace cnmf {

// Binary outcome driven by the planted loadings:
// y_j ~ Bernoulli(sigmoid(theta^T w*_j + intercept + noise * z_j)), z_j ~ N(0, 1),
// theta_k ~ weight_scale * N(0, 1), intercept = -median_j(theta^T w*_j).
struct LabelRule {
  double weight_scale = 8.0;
  double noise = 0.1;
};

struct GenConfig {
  Index n_features = 60;           // d
  Index n_columns = 300;           // N
  Index n_conditions = 4;          // K
  double lambda = 20.0;            // planted phenotype column sum
  double support_density = 0.35;   // P(k in C*_j)
  Index phenotype_support_size = 15;
  double overlap = 0.0;            // fraction of a phenotype's terms shared with the next one
  double bias_scale = 0.3;         // mean of b*
  std::optional<LabelRule> label_rule;

  void validate() const;
};

struct PlantedInstance {
  Matrix A_true;
  Matrix W_true;
  Vector b_true;
  SupportSets supports_true;
  CountMatrix X;
  std::optional<std::vector<int>> labels;
  Vector label_weights;     // theta, empty without a label rule
  double label_intercept = 0.0;
  double lambda = 0.0;
  std::uint64_t rng_seed = 0;

  FactorModel planted_model() const { return {A_true, W_true, b_true, lambda, true}; }
};

/// Samples (A*, W*, b*, C*) and X ~ Poisson(A* W* + b* 1^T).
PlantedInstance generate(const GenConfig& cfg, std::uint64_t seed);

/// Independent Poisson draws with the given means.
CountMatrix sample_poisson(const Matrix& means, Rng& rng);

struct FactorMatch {
  struct Pair {
    Index fit_column;
    Index true_column;
    double cosine;
  };
  std::vector<Pair> pairs;          // in assignment order
  std::vector<Index> permutation;   // permutation[true_column] = fit_column

  double mean_cosine() const;
};

/// Greedy maximum-cosine assignment of fitted to planted columns without
/// replacement. Zero-norm columns have cosine 0 with everything.
FactorMatch match_factors(const Matrix& A_fit, const Matrix& A_true);

}  // namespace cnmf
