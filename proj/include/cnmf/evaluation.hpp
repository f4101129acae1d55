#pragma once

#include "cnmf/logreg.hpp"
#include "cnmf/model.hpp"
#include "cnmf/solver.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cnmf {

struct SparsityReport {
  std::vector<Index> per_column_nnz;
  double median_nnz = 0.0;
  double third_quartile_nnz = 0.0;
  double lambda = 0.0;
  bool min_terms_ok = false;
};

/// Non-zero counts (|a_ik| > zero_tol) per phenotype column. Quantiles use
/// linear interpolation between order statistics.
SparsityReport sparsity(const FactorModel& model, double zero_tol = 1e-12, Index min_terms = 5);

struct SweepRow {
  double lambda = 0.0;
  double divergence = 0.0;
  SparsityReport sparsity;
  std::optional<std::string> error;  // set when the fit for this lambda failed
};

/// One fit per lambda with the same seeds; a failing lambda is recorded and
/// the sweep continues.
std::vector<SweepRow> lambda_sweep(const CountMatrix& X, const SupportSets& supports, std::span<const double> lambdas,
                                   const SolverConfig& cfg);

struct RankedTerm {
  Index index;
  std::string name;
  double weight;
};

struct TopTerms {
  std::vector<std::vector<RankedTerm>> per_condition;
  bool truncated = false;  // k exceeded d
};

/// The k largest-magnitude entries of each phenotype column, descending, ties by feature index.
TopTerms top_terms(const FactorModel& model, std::span<const std::string> names, Index k = 15);

/// Fold id in [0, n_folds) per sample; each class is shuffled and dealt
/// round-robin so every fold gets floor or ceil of its share.
std::vector<int> stratified_folds(std::span<const int> labels, int n_folds, Rng& rng);

struct TrainedClassifier {
  LogRegModel model;
  double chosen_strength = 0.0;
  std::vector<double> validation_auroc;  // per grid point
};

/// Grid search over `strengths` on a single stratified 80/20 split of the
/// training data (by validation AUROC, first best wins), then a refit on all of it.
TrainedClassifier train_logreg(const Matrix& features, std::span<const int> labels, Penalty penalty,
                               std::span<const double> strengths, Rng& rng, const LogRegOptions& options = {});

enum class FeatureMode { loadings, raw, augmented };

FeatureMode parse_feature_mode(const std::string& text);
std::string to_string(FeatureMode mode);

struct FoldMetrics {
  double auroc = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double strength = 0.0;
};

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;
};

struct PredictionReport {
  FeatureMode mode = FeatureMode::loadings;
  std::vector<FoldMetrics> per_fold;
  MetricSummary auroc, sensitivity, specificity;
  std::vector<double> chosen_strengths;  // one per fold
  std::optional<double> nonzero_raw_feature_fraction;  // augmented mode only
  Vector mean_weights;  // classifier weights averaged over folds (standardized features)
};

struct PredictConfig {
  SolverConfig solver;
  int n_folds = 5;
  std::vector<double> strengths{1e-3, 1e-2, 1e-1, 1.0};
  std::uint64_t seed = 0;
  LogRegOptions logreg;
};

/// Cross-validated binary prediction. Per fold the factor model is fitted on
/// training columns only; training loadings use the training supports, test
/// loadings are inferred without supports. Classifier: l2 on loadings, l1 on
/// raw counts and on the augmented [loadings, raw] features. Features are
/// standardized with training-fold statistics. Sensitivity and specificity use
/// the threshold maximizing Youden's J on the training fold.
PredictionReport predict_eval(const CountMatrix& X, const SupportSets& supports, std::span<const int> labels,
                              FeatureMode mode, const PredictConfig& cfg);

struct WeightTables {
  std::vector<RankedTerm> loadings;
  std::vector<RankedTerm> raw;
};

/// Splits augmented-mode weights into the loading block (first K) and the raw
/// block (next d), each sorted by descending |weight|, ties by index.
WeightTables weight_inspection(std::span<const double> weights, std::span<const std::string> feature_names,
                               std::span<const std::string> condition_names, Index top_k);

}  // namespace cnmf
