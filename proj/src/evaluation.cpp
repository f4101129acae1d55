#include "cnmf/evaluation.hpp"

#include "cnmf/error.hpp"
#include "cnmf/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cnmf {

namespace {

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<RankedTerm> rank_by_magnitude(std::span<const double> weights, std::span<const std::string> names,
                                          Index top_k) {
  std::vector<Index> order(weights.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return std::abs(weights[static_cast<std::size_t>(a)]) > std::abs(weights[static_cast<std::size_t>(b)]);
  });
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(std::max<Index>(top_k, 0)), order.size());
  std::vector<RankedTerm> out;
  out.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto i = static_cast<std::size_t>(order[r]);
    out.push_back({order[r], names[i], weights[i]});
  }
  return out;
}

void require_binary(std::span<const int> labels) {
  for (int y : labels) {
    if (y != 0 && y != 1) throw std::invalid_argument("labels must be 0 or 1");
  }
}

MetricSummary summarize(const std::vector<double>& v) {
  MetricSummary s;
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

struct Standardizer {
  Vector mean;
  Vector scale;

  explicit Standardizer(const Matrix& train) {
    const double n = static_cast<double>(train.rows());
    mean = train.colwise().mean().transpose();
    scale.resize(train.cols());
    for (Index c = 0; c < train.cols(); ++c) {
      const double var = (train.col(c).array() - mean(c)).square().sum() / n;
      scale(c) = var > 0.0 ? std::sqrt(var) : 1.0;
    }
  }

  Matrix apply(const Matrix& m) const {
    return ((m.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array()).matrix();
  }
};

// Threshold maximizing sensitivity + specificity - 1; predictions are score >= threshold.
double youden_threshold(const Vector& scores, std::span<const int> labels) {
  std::vector<Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(a) > scores(b); });
  const double P = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const double N = static_cast<double>(labels.size()) - P;
  double tp = 0.0, fp = 0.0;
  double best_j = -2.0;
  double best_thr = order.empty() ? 0.0 : scores(order.front());
  for (std::size_t r = 0; r < order.size();) {
    const double s = scores(order[r]);
    while (r < order.size() && scores(order[r]) == s) {
      (labels[static_cast<std::size_t>(order[r])] == 1 ? tp : fp) += 1.0;
      ++r;
    }
    const double j = tp / P + (N - fp) / N - 1.0;
    if (j > best_j) {
      best_j = j;
      best_thr = s;
    }
  }
  return best_thr;
}

std::pair<double, double> sensitivity_specificity(const Vector& scores, std::span<const int> labels, double thr) {
  double tp = 0, fn = 0, tn = 0, fp = 0;
  for (Index i = 0; i < scores.size(); ++i) {
    const bool pred = scores(i) >= thr;
    if (labels[static_cast<std::size_t>(i)] == 1) {
      (pred ? tp : fn) += 1.0;
    } else {
      (pred ? fp : tn) += 1.0;
    }
  }
  return {tp + fn > 0 ? tp / (tp + fn) : 0.0, tn + fp > 0 ? tn / (tn + fp) : 0.0};
}

std::vector<int> gather(std::span<const int> v, const std::vector<Index>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (Index i : idx) out.push_back(v[static_cast<std::size_t>(i)]);
  return out;
}

Matrix gather_rows(const Matrix& m, const std::vector<Index>& idx) {
  Matrix out(static_cast<Index>(idx.size()), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Index>(r)) = m.row(idx[r]);
  return out;
}

}  // namespace

SparsityReport sparsity(const FactorModel& model, double zero_tol, Index min_terms) {
  SparsityReport r;
  r.lambda = model.lambda;
  std::vector<double> counts;
  for (Index k = 0; k < model.A.cols(); ++k) {
    const Index nnz = (model.A.col(k).array().abs() > zero_tol).count();
    r.per_column_nnz.push_back(nnz);
    counts.push_back(static_cast<double>(nnz));
  }
  r.median_nnz = quantile(counts, 0.5);
  r.third_quartile_nnz = quantile(counts, 0.75);
  r.min_terms_ok = std::all_of(r.per_column_nnz.begin(), r.per_column_nnz.end(),
                               [&](Index c) { return c >= min_terms; });
  return r;
}

std::vector<SweepRow> lambda_sweep(const CountMatrix& X, const SupportSets& supports, std::span<const double> lambdas,
                                   const SolverConfig& cfg) {
  if (lambdas.empty()) throw std::invalid_argument("lambda sweep needs at least one lambda");
  std::vector<SweepRow> rows;
  for (double lambda : lambdas) {
    SweepRow row;
    row.lambda = lambda;
    try {
      SolverConfig c = cfg;
      c.lambda = lambda;
      const FitResult fitted = fit(X, supports, c);
      row.divergence = fitted.report.objective_trace.back();
      row.sparsity = sparsity(fitted.model);
    } catch (const std::exception& e) {
      row.error = e.what();
      row.divergence = std::nan("");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

TopTerms top_terms(const FactorModel& model, std::span<const std::string> names, Index k) {
  const Index d = model.A.rows();
  if (static_cast<Index>(names.size()) != d) {
    throw DimensionError("expected " + std::to_string(d) + " feature names, got " + std::to_string(names.size()));
  }
  TopTerms out;
  if (k > d) {
    out.truncated = true;
    k = d;
  }
  for (Index c = 0; c < model.A.cols(); ++c) {
    const Vector col = model.A.col(c);
    out.per_condition.push_back(rank_by_magnitude(std::span<const double>(col.data(), col.size()), names, k));
  }
  return out;
}

std::vector<int> stratified_folds(std::span<const int> labels, int n_folds, Rng& rng) {
  require_binary(labels);
  if (n_folds < 2) throw std::invalid_argument("need at least two folds");
  std::vector<Index> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(static_cast<Index>(i));
  if (pos.empty() || neg.empty()) throw std::invalid_argument("stratified folds need both classes");
  if (static_cast<std::size_t>(n_folds) > std::min(pos.size(), neg.size())) {
    throw std::invalid_argument("more folds than members of the minority class");
  }
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);
  std::vector<int> fold(labels.size(), -1);
  std::size_t slot = 0;
  for (Index i : pos) fold[static_cast<std::size_t>(i)] = static_cast<int>(slot++ % static_cast<std::size_t>(n_folds));
  for (Index i : neg) fold[static_cast<std::size_t>(i)] = static_cast<int>(slot++ % static_cast<std::size_t>(n_folds));
  return fold;
}

TrainedClassifier train_logreg(const Matrix& features, std::span<const int> labels, Penalty penalty,
                               std::span<const double> strengths, Rng& rng, const LogRegOptions& options) {
  if (strengths.empty()) throw std::invalid_argument("empty regularization grid");
  require_binary(labels);
  const std::vector<int> split = stratified_folds(labels, 5, rng);
  std::vector<Index> inner, valid;
  for (std::size_t i = 0; i < split.size(); ++i) (split[i] == 0 ? valid : inner).push_back(static_cast<Index>(i));
  const Matrix f_inner = gather_rows(features, inner);
  const Matrix f_valid = gather_rows(features, valid);
  const std::vector<int> y_inner = gather(labels, inner);
  const std::vector<int> y_valid = gather(labels, valid);

  TrainedClassifier out;
  double best = -1.0;
  for (double s : strengths) {
    const LogRegModel m = fit_logreg(f_inner, y_inner, penalty, s, options);
    const Vector scores = m.decision(f_valid);
    const double a = auroc(std::span<const double>(scores.data(), scores.size()), y_valid);
    out.validation_auroc.push_back(a);
    if (a > best) {
      best = a;
      out.chosen_strength = s;
    }
  }
  out.model = fit_logreg(features, labels, penalty, out.chosen_strength, options);
  return out;
}

FeatureMode parse_feature_mode(const std::string& text) {
  if (text == "loadings") return FeatureMode::loadings;
  if (text == "raw") return FeatureMode::raw;
  if (text == "augmented") return FeatureMode::augmented;
  throw std::invalid_argument("unknown feature mode '" + text + "' (expected loadings, raw or augmented)");
}

std::string to_string(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::loadings: return "loadings";
    case FeatureMode::raw: return "raw";
    case FeatureMode::augmented: return "augmented";
  }
  return "?";
}

PredictionReport predict_eval(const CountMatrix& X, const SupportSets& supports, std::span<const int> labels,
                              FeatureMode mode, const PredictConfig& cfg) {
  const Index N = X.n_columns();
  const Index d = X.n_features();
  const Index K = cfg.solver.n_conditions;
  if (static_cast<Index>(labels.size()) != N) {
    throw DimensionError("got " + std::to_string(labels.size()) + " labels for " + std::to_string(N) + " columns");
  }
  if (mode != FeatureMode::raw && supports.n_columns() != N) {
    throw DimensionError("support sets cover " + std::to_string(supports.n_columns()) + " columns, X has " +
                         std::to_string(N));
  }
  require_binary(labels);

  Rng fold_rng(cfg.seed);
  const std::vector<int> fold = stratified_folds(labels, cfg.n_folds, fold_rng);
  const Matrix raw = X.to_dense().transpose();  // N x d

  PredictionReport report;
  report.mode = mode;
  const Index n_features = mode == FeatureMode::loadings ? K : mode == FeatureMode::raw ? d : K + d;
  report.mean_weights = Vector::Zero(n_features);
  const Penalty penalty = mode == FeatureMode::loadings ? Penalty::l2 : Penalty::l1;
  std::vector<double> aucs, sens, specs, nonzero;

  for (int f = 0; f < cfg.n_folds; ++f) {
    std::vector<Index> train, test;
    for (Index j = 0; j < N; ++j) (fold[static_cast<std::size_t>(j)] == f ? test : train).push_back(j);

    Matrix f_train(static_cast<Index>(train.size()), n_features);
    Matrix f_test(static_cast<Index>(test.size()), n_features);
    if (mode != FeatureMode::raw) {
      const CountMatrix X_train = X.select_columns(train);
      const CountMatrix X_test = X.select_columns(test);
      const SupportSets S_train = supports.select_columns(train);
      const FitResult fitted = fit(X_train, S_train, cfg.solver);
      // Test columns never see their supports.
      f_train.leftCols(K) = transform(X_train, fitted.model, S_train, cfg.solver).transpose();
      f_test.leftCols(K) = transform(X_test, fitted.model, cfg.solver).transpose();
    }
    if (mode != FeatureMode::loadings) {
      f_train.rightCols(d) = gather_rows(raw, train);
      f_test.rightCols(d) = gather_rows(raw, test);
    }
    const Standardizer standardize(f_train);
    f_train = standardize.apply(f_train);
    f_test = standardize.apply(f_test);

    const std::vector<int> y_train = gather(labels, train);
    const std::vector<int> y_test = gather(labels, test);
    Rng inner_rng(restart_seed(cfg.seed, f + 1));
    const TrainedClassifier clf = train_logreg(f_train, y_train, penalty, cfg.strengths, inner_rng, cfg.logreg);

    const Vector s_train = clf.model.decision(f_train);
    const Vector s_test = clf.model.decision(f_test);
    const double thr = youden_threshold(s_train, y_train);
    const auto [se, sp] = sensitivity_specificity(s_test, y_test, thr);
    FoldMetrics m;
    m.auroc = auroc(std::span<const double>(s_test.data(), s_test.size()), y_test);
    m.sensitivity = se;
    m.specificity = sp;
    m.strength = clf.chosen_strength;
    report.per_fold.push_back(m);
    report.chosen_strengths.push_back(clf.chosen_strength);
    aucs.push_back(m.auroc);
    sens.push_back(se);
    specs.push_back(sp);
    report.mean_weights += clf.model.weights / static_cast<double>(cfg.n_folds);
    if (mode == FeatureMode::augmented) {
      const Index nz = (clf.model.weights.tail(d).array() != 0.0).count();
      nonzero.push_back(static_cast<double>(nz) / static_cast<double>(d));
    }
  }
  report.auroc = summarize(aucs);
  report.sensitivity = summarize(sens);
  report.specificity = summarize(specs);
  if (mode == FeatureMode::augmented) report.nonzero_raw_feature_fraction = summarize(nonzero).mean;
  return report;
}

WeightTables weight_inspection(std::span<const double> weights, std::span<const std::string> feature_names,
                               std::span<const std::string> condition_names, Index top_k) {
  const std::size_t K = condition_names.size();
  const std::size_t d = feature_names.size();
  if (weights.size() != K + d) {
    throw DimensionError("expected " + std::to_string(K + d) + " weights (" + std::to_string(K) + " loadings + " +
                         std::to_string(d) + " raw), got " + std::to_string(weights.size()));
  }
  WeightTables t;
  t.loadings = rank_by_magnitude(weights.first(K), condition_names, top_k);
  t.raw = rank_by_magnitude(weights.subspan(K), feature_names, top_k);
  return t;
}

}  // namespace cnmf
