#include "cnmf/datagen.hpp"
#include "cnmf/error.hpp"
#include "cnmf/evaluation.hpp"
#include "cnmf/logreg.hpp"
#include "cnmf/projections.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace cnmf;

namespace {

FactorModel with_phenotypes(const Matrix& A, double lambda = 1.0) {
  return {A, Matrix::Zero(A.cols(), 1), Vector::Zero(A.rows()), lambda, true};
}

std::vector<std::string> names(Index n, const std::string& prefix = "t") {
  std::vector<std::string> out;
  for (Index i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

std::vector<int> alternating_labels(int n, int positives) {
  std::vector<int> y(static_cast<std::size_t>(n), 0);
  std::fill_n(y.begin(), positives, 1);
  return y;
}

// Direct sort oracle: indices by descending |value|, ties by index.
std::vector<Index> sort_oracle(const Vector& v) {
  std::vector<Index> idx(static_cast<std::size_t>(v.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return std::abs(v(a)) > std::abs(v(b)); });
  return idx;
}

}  // namespace

TEST(Sparsity, ProjectionOutputsAreSparse) {
  std::mt19937_64 rng(1);
  std::cauchy_distribution<double> heavy(0.0, 1.0);
  Matrix A(50, 6);
  for (Index k = 0; k < 6; ++k) {
    Vector v(50);
    for (Index i = 0; i < 50; ++i) v(i) = heavy(rng);
    A.col(k) = project_scaled_simplex(v, 1.0);
  }
  const SparsityReport r = sparsity(with_phenotypes(A));
  for (Index n : r.per_column_nnz) EXPECT_LT(n, 50);
  const SparsityReport loose = sparsity(with_phenotypes(A), 1e-8);
  EXPECT_EQ(r.per_column_nnz, loose.per_column_nnz);
}

TEST(Sparsity, UniformColumnsAndQuantiles) {
  const SparsityReport full = sparsity(with_phenotypes(Matrix::Constant(7, 3, 0.4 / 7.0), 0.4));
  EXPECT_EQ(full.median_nnz, 7.0);
  EXPECT_TRUE(full.min_terms_ok);
  EXPECT_EQ(full.lambda, 0.4);

  Matrix A = Matrix::Zero(10, 4);
  for (Index k = 0; k < 4; ++k) A.topRows(2 * (k + 1)).col(k).setConstant(0.1);
  const SparsityReport r = sparsity(with_phenotypes(A), 1e-12, 5);
  EXPECT_EQ(r.per_column_nnz, (std::vector<Index>{2, 4, 6, 8}));
  EXPECT_DOUBLE_EQ(r.median_nnz, 5.0);
  EXPECT_DOUBLE_EQ(r.third_quartile_nnz, 6.5);
  EXPECT_FALSE(r.min_terms_ok);
}

TEST(LambdaSweep, SingleAndDuplicateLambdas) {
  GenConfig g;
  g.n_features = 12;
  g.n_columns = 40;
  g.n_conditions = 3;
  g.lambda = 1.0;
  g.phenotype_support_size = 4;
  const PlantedInstance inst = generate(g, 2);
  SolverConfig c;
  c.n_conditions = 3;
  c.n_restarts = 2;
  c.max_outer_iters = 100;
  const std::vector<double> one{0.4};
  const auto rows = lambda_sweep(inst.X, inst.supports_true, one, c);
  ASSERT_EQ(rows.size(), 1u);
  c.lambda = 0.4;
  const FitResult r = fit(inst.X, inst.supports_true, c);
  EXPECT_EQ(rows[0].divergence, r.report.objective_trace.back());
  EXPECT_EQ(rows[0].sparsity.per_column_nnz, sparsity(r.model).per_column_nnz);

  const std::vector<double> dup{1.0, 1.0};
  const auto twice = lambda_sweep(inst.X, inst.supports_true, dup, c);
  EXPECT_EQ(twice[0].divergence, twice[1].divergence);
  EXPECT_EQ(twice[0].sparsity.per_column_nnz, twice[1].sparsity.per_column_nnz);
}

TEST(LambdaSweep, RecordsFailuresAndContinues) {
  const CountMatrix X(3, 4, {{0, 0, 1.0}, {1, 2, 2.0}});
  SolverConfig c;
  c.n_conditions = 2;
  c.n_restarts = 1;
  const std::vector<double> lambdas{-1.0, 0.5};
  const auto rows = lambda_sweep(X, SupportSets::full(4, 2), lambdas, c);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(rows[0].error.has_value());
  EXPECT_FALSE(rows[1].error.has_value());
  EXPECT_THROW(lambda_sweep(X, SupportSets::full(4, 2), std::vector<double>{}, c), std::invalid_argument);
}

TEST(TopTerms, OneHotUniformAndPadding) {
  Matrix A = Matrix::Zero(5, 3);
  A(3, 0) = 1.0;
  A.col(1).setConstant(0.2);
  A(1, 2) = 0.6;
  A(4, 2) = 0.4;
  const auto n = names(5);
  const TopTerms top = top_terms(with_phenotypes(A), n, 4);
  EXPECT_FALSE(top.truncated);
  EXPECT_EQ(top.per_condition[0][0].name, "t3");
  for (Index i = 0; i < 4; ++i) EXPECT_EQ(top.per_condition[1][i].index, i);
  // two nonzero terms, then zero-weight terms by index
  const std::vector<Index> expected{1, 4, 0, 2};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(top.per_condition[2][i].index, expected[i]);
  EXPECT_EQ(top.per_condition[2][2].weight, 0.0);
}

TEST(TopTerms, TruncatesWhenKExceedsD) {
  const TopTerms top = top_terms(with_phenotypes(Matrix::Identity(3, 2)), names(3), 10);
  EXPECT_TRUE(top.truncated);
  EXPECT_EQ(top.per_condition[0].size(), 3u);
  EXPECT_THROW(top_terms(with_phenotypes(Matrix::Identity(3, 2)), names(2), 2), DimensionError);
}

TEST(Folds, ForcedCounts) {
  const std::vector<int> y = alternating_labels(10, 5);
  Rng rng(1);
  const std::vector<int> folds = stratified_folds(y, 5, rng);
  for (int f = 0; f < 5; ++f) {
    int pos = 0, neg = 0;
    for (std::size_t i = 0; i < 10; ++i) {
      if (folds[i] != f) continue;
      (y[i] ? pos : neg)++;
    }
    EXPECT_EQ(pos, 1);
    EXPECT_EQ(neg, 1);
  }
  Rng again(1);
  EXPECT_EQ(stratified_folds(y, 5, again), folds);
}

TEST(Folds, CountingArgumentAndRateBound) {
  std::vector<int> y = alternating_labels(1000, 100);
  std::mt19937_64 shuffle_rng(3);
  std::shuffle(y.begin(), y.end(), shuffle_rng);
  Rng rng(2);
  const std::vector<int> folds = stratified_folds(y, 5, rng);
  for (int f = 0; f < 5; ++f) {
    int pos = 0, size = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (folds[i] != f) continue;
      ++size;
      pos += y[i];
    }
    EXPECT_EQ(pos, 20);
    EXPECT_LE(std::abs(static_cast<double>(pos) / size - 0.1), 1.0 / size);
  }
}

TEST(Folds, Errors) {
  Rng rng(1);
  EXPECT_THROW(stratified_folds(std::vector<int>(6, 1), 2, rng), std::invalid_argument);
  EXPECT_THROW(stratified_folds(alternating_labels(10, 2), 5, rng), std::invalid_argument);
  EXPECT_THROW(stratified_folds(alternating_labels(10, 5), 1, rng), std::invalid_argument);
}

TEST(Auroc, MatchesPairwiseOracle) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> coarse(0, 6);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const int n = 2 + t * 2;
    std::vector<double> s(static_cast<std::size_t>(n));
    std::vector<int> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      y[i] = i % 3 == 0;
      s[i] = t % 2 ? coarse(rng) : g(rng) + y[i];
    }
    EXPECT_NEAR(auroc(s, y), oracle::pairwise_auroc(s, y), 1e-10);
  }
  EXPECT_THROW(auroc(std::vector<double>{1.0, 2.0}, std::vector<int>{1, 1}), std::invalid_argument);
}

TEST(LogReg, SeparableOneDimensional) {
  Matrix x(20, 1);
  std::vector<int> y(20);
  for (int i = 0; i < 20; ++i) {
    x(i, 0) = i - 9.5;
    y[i] = i >= 10;
  }
  const LogRegModel m = fit_logreg(x, y, Penalty::l2, 1.0);
  EXPECT_TRUE(m.converged);
  EXPECT_TRUE(std::isfinite(m.weights(0)));
  EXPECT_GT(m.weights(0), 0.0);
  const Vector s = m.decision(x);
  EXPECT_EQ(auroc(std::vector<double>(s.begin(), s.end()), y), 1.0);
}

TEST(LogReg, ZeroColumnGetsZeroWeightUnderL1) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix x(100, 3);
  std::vector<int> y(100);
  for (int i = 0; i < 100; ++i) {
    x(i, 0) = g(rng);
    x(i, 1) = 0.0;
    x(i, 2) = g(rng);
    y[i] = x(i, 0) + 0.5 * g(rng) > 0.0;
  }
  const LogRegModel m = fit_logreg(x, y, Penalty::l1, 0.01);
  EXPECT_TRUE(m.converged);
  EXPECT_EQ(m.weights(1), 0.0);
  EXPECT_GT(m.weights(0), 0.5);
}

TEST(LogReg, OptimalityConditions) {
  // At the l2 optimum: mean((p - y) x) + strength w = 0 and mean(p - y) = 0.
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix x(80, 4);
  std::vector<int> y(80);
  for (int i = 0; i < 80; ++i) {
    for (int k = 0; k < 4; ++k) x(i, k) = g(rng);
    y[i] = x(i, 0) - x(i, 2) + g(rng) > 0.0;
  }
  const double lam = 0.05;
  const LogRegModel m = fit_logreg(x, y, Penalty::l2, lam);
  ASSERT_TRUE(m.converged);
  const Vector z = m.decision(x);
  Vector grad = lam * m.weights;
  double gc = 0.0;
  for (int i = 0; i < 80; ++i) {
    const double r = 1.0 / (1.0 + std::exp(-z(i))) - y[i];
    grad += r * x.row(i).transpose() / 80.0;
    gc += r / 80.0;
  }
  EXPECT_LE(grad.norm(), 1e-5);
  EXPECT_LE(std::abs(gc), 1e-5);
}

TEST(TrainLogReg, PicksFromGrid) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix x(120, 2);
  std::vector<int> y(120);
  for (int i = 0; i < 120; ++i) {
    x(i, 0) = g(rng);
    x(i, 1) = g(rng);
    y[i] = x(i, 0) + 0.3 * g(rng) > 0.0;
  }
  const std::vector<double> grid{1e-3, 1e-2, 1e-1, 1.0};
  Rng r(1);
  const TrainedClassifier c = train_logreg(x, y, Penalty::l1, grid, r);
  EXPECT_NE(std::find(grid.begin(), grid.end(), c.chosen_strength), grid.end());
  EXPECT_EQ(c.validation_auroc.size(), 4u);
  EXPECT_EQ(c.model.strength, c.chosen_strength);
}

TEST(FeatureMode, ParseAndPrint) {
  for (auto m : {FeatureMode::loadings, FeatureMode::raw, FeatureMode::augmented}) {
    EXPECT_EQ(parse_feature_mode(to_string(m)), m);
  }
  EXPECT_THROW(parse_feature_mode("both"), std::invalid_argument);
}

TEST(WeightInspection, ZeroSingleAndRandom) {
  const auto feats = names(6, "f");
  const auto conds = names(3, "c");
  const WeightTables zero = weight_inspection(std::vector<double>(9, 0.0), feats, conds, 3);
  ASSERT_EQ(zero.loadings.size(), 3u);
  ASSERT_EQ(zero.raw.size(), 3u);
  for (Index i = 0; i < 3; ++i) {
    EXPECT_EQ(zero.loadings[i].index, i);
    EXPECT_EQ(zero.raw[i].index, i);
    EXPECT_EQ(zero.raw[i].weight, 0.0);
  }

  std::vector<double> one(9, 0.0);
  one[3 + 4] = -0.7;
  const WeightTables single = weight_inspection(one, feats, conds, 2);
  EXPECT_EQ(single.raw[0].name, "f4");
  EXPECT_EQ(single.raw[0].weight, -0.7);

  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> w(9);
  for (double& v : w) v = g(rng);
  const WeightTables t = weight_inspection(w, feats, conds, 6);
  Vector raw(6), load(3);
  for (Index i = 0; i < 3; ++i) load(i) = w[i];
  for (Index i = 0; i < 6; ++i) raw(i) = w[3 + i];
  const auto raw_order = sort_oracle(raw), load_order = sort_oracle(load);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(t.raw[i].index, raw_order[i]);
  ASSERT_EQ(t.loadings.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(t.loadings[i].index, load_order[i]);

  EXPECT_THROW(weight_inspection(std::vector<double>(8, 0.0), feats, conds, 2), DimensionError);
}

TEST(PredictEval, SmallInstanceShapes) {
  GenConfig g;
  g.n_features = 20;
  g.n_columns = 100;
  g.n_conditions = 3;
  g.lambda = 6.0;
  g.phenotype_support_size = 6;
  g.label_rule = LabelRule{};
  const PlantedInstance inst = generate(g, 3);
  PredictConfig pc;
  pc.solver.lambda = 6.0;
  pc.solver.n_conditions = 3;
  pc.solver.n_restarts = 1;
  pc.solver.max_outer_iters = 50;
  pc.seed = 1;
  const PredictionReport aug = predict_eval(inst.X, inst.supports_true, *inst.labels, FeatureMode::augmented, pc);
  ASSERT_EQ(aug.per_fold.size(), 5u);
  ASSERT_TRUE(aug.nonzero_raw_feature_fraction.has_value());
  EXPECT_GE(*aug.nonzero_raw_feature_fraction, 0.0);
  EXPECT_LE(*aug.nonzero_raw_feature_fraction, 1.0);
  EXPECT_EQ(aug.mean_weights.size(), 23);
  for (const auto& f : aug.per_fold) {
    for (double v : {f.auroc, f.sensitivity, f.specificity}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  const PredictionReport load = predict_eval(inst.X, inst.supports_true, *inst.labels, FeatureMode::loadings, pc);
  EXPECT_FALSE(load.nonzero_raw_feature_fraction.has_value());
  EXPECT_EQ(load.mean_weights.size(), 3);
  const PredictionReport again = predict_eval(inst.X, inst.supports_true, *inst.labels, FeatureMode::loadings, pc);
  EXPECT_EQ(load.auroc.mean, again.auroc.mean);

  std::vector<int> short_labels(*inst.labels);
  short_labels.pop_back();
  EXPECT_THROW(predict_eval(inst.X, inst.supports_true, short_labels, FeatureMode::raw, pc), DimensionError);
}
