#include "cnmf/datagen.hpp"

#include "cnmf/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace cnmf {

void GenConfig::validate() const {
  if (n_features < 1 || n_columns < 1 || n_conditions < 1) throw ConfigError("gen: counts must be positive");
  if (!(lambda > 0.0)) throw ConfigError("gen: lambda must be positive");
  if (!(support_density >= 0.0 && support_density <= 1.0)) throw ConfigError("gen: support_density must lie in [0, 1]");
  if (phenotype_support_size < 1 || phenotype_support_size > n_features) {
    throw ConfigError("gen: phenotype_support_size must lie in [1, n_features]");
  }
  if (!(overlap >= 0.0 && overlap < 1.0)) throw ConfigError("gen: overlap must lie in [0, 1)");
  if (!(bias_scale >= 0.0)) throw ConfigError("gen: bias_scale must be non-negative");
  if (label_rule && (!(label_rule->weight_scale >= 0.0) || !(label_rule->noise >= 0.0))) {
    throw ConfigError("gen: label_rule parameters must be non-negative");
  }
}

CountMatrix sample_poisson(const Matrix& means, Rng& rng) {
  std::vector<CountMatrix::Entry> entries;
  for (Index j = 0; j < means.cols(); ++j) {
    for (Index i = 0; i < means.rows(); ++i) {
      const double mu = means(i, j);
      if (!(mu >= 0.0) || !std::isfinite(mu)) throw std::invalid_argument("Poisson mean must be finite and >= 0");
      if (mu == 0.0) continue;
      std::poisson_distribution<long long> pois(mu);
      const auto count = pois(rng);
      if (count > 0) entries.push_back({i, j, static_cast<double>(count)});
    }
  }
  return CountMatrix(means.rows(), means.cols(), std::move(entries));
}

PlantedInstance generate(const GenConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const Index d = cfg.n_features;
  const Index N = cfg.n_columns;
  const Index K = cfg.n_conditions;
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  PlantedInstance inst;
  inst.rng_seed = seed;
  inst.lambda = cfg.lambda;

  // Phenotype k occupies a contiguous (cyclic) block of terms; consecutive
  // blocks share round(overlap * size) terms.
  const Index size = cfg.phenotype_support_size;
  const Index stride = std::max<Index>(1, size - static_cast<Index>(std::lround(cfg.overlap * static_cast<double>(size))));
  inst.A_true = Matrix::Zero(d, K);
  for (Index k = 0; k < K; ++k) {
    for (Index t = 0; t < size; ++t) inst.A_true((k * stride + t) % d, k) = 0.5 + unit(rng);
    inst.A_true.col(k) *= cfg.lambda / inst.A_true.col(k).sum();
  }

  std::vector<std::vector<Index>> sets(static_cast<std::size_t>(N));
  inst.W_true = Matrix::Zero(K, N);
  for (Index j = 0; j < N; ++j) {
    for (Index k = 0; k < K; ++k) {
      if (unit(rng) < cfg.support_density) {
        sets[static_cast<std::size_t>(j)].push_back(k);
        inst.W_true(k, j) = 0.2 + 0.8 * unit(rng);
      }
    }
  }
  inst.supports_true = SupportSets(K, std::move(sets));

  inst.b_true.resize(d);
  for (Index i = 0; i < d; ++i) inst.b_true(i) = 2.0 * cfg.bias_scale * unit(rng);

  Matrix means = inst.A_true * inst.W_true;
  means.colwise() += inst.b_true;
  inst.X = sample_poisson(means, rng);

  if (cfg.label_rule) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    inst.label_weights.resize(K);
    for (Index k = 0; k < K; ++k) inst.label_weights(k) = cfg.label_rule->weight_scale * gauss(rng);
    Vector score = inst.W_true.transpose() * inst.label_weights;
    std::vector<double> sorted(score.data(), score.data() + score.size());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    const double median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
    inst.label_intercept = -median;
    std::vector<int> labels(static_cast<std::size_t>(N));
    for (Index j = 0; j < N; ++j) {
      const double logit = score(j) + inst.label_intercept + cfg.label_rule->noise * gauss(rng);
      labels[static_cast<std::size_t>(j)] = unit(rng) < 1.0 / (1.0 + std::exp(-logit)) ? 1 : 0;
    }
    inst.labels = std::move(labels);
  }
  return inst;
}

double FactorMatch::mean_cosine() const {
  if (pairs.empty()) return 0.0;
  double s = 0.0;
  for (const auto& p : pairs) s += p.cosine;
  return s / static_cast<double>(pairs.size());
}

FactorMatch match_factors(const Matrix& A_fit, const Matrix& A_true) {
  if (A_fit.rows() != A_true.rows() || A_fit.cols() != A_true.cols()) {
    throw DimensionError("fitted and planted phenotype matrices differ in shape");
  }
  const Index K = A_true.cols();
  Matrix cos = Matrix::Zero(K, K);  // (fit, true)
  for (Index f = 0; f < K; ++f) {
    for (Index t = 0; t < K; ++t) {
      const double denom = A_fit.col(f).norm() * A_true.col(t).norm();
      cos(f, t) = denom > 0.0 ? A_fit.col(f).dot(A_true.col(t)) / denom : 0.0;
    }
  }
  FactorMatch m;
  m.permutation.assign(static_cast<std::size_t>(K), -1);
  std::vector<bool> fit_used(static_cast<std::size_t>(K), false);
  for (Index round = 0; round < K; ++round) {
    Index bf = -1, bt = -1;
    for (Index f = 0; f < K; ++f) {
      if (fit_used[static_cast<std::size_t>(f)]) continue;
      for (Index t = 0; t < K; ++t) {
        if (m.permutation[static_cast<std::size_t>(t)] >= 0) continue;
        if (bf < 0 || cos(f, t) > cos(bf, bt)) {
          bf = f;
          bt = t;
        }
      }
    }
    fit_used[static_cast<std::size_t>(bf)] = true;
    m.permutation[static_cast<std::size_t>(bt)] = bf;
    m.pairs.push_back({bf, bt, cos(bf, bt)});
  }
  return m;
}

}  // namespace cnmf
