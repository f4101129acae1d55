#pragma once

#include "cnmf/model.hpp"
#include "cnmf/objective.hpp"

#include <cstdint>
#include <random>
#include <utility>

namespace cnmf {

struct SolverConfig {
  double lambda = 0.4;
  Index n_conditions = 1;          // K
  bool simplex_enabled = true;     // false gives the NMF+support ablation
  int max_outer_iters = 500;
  double outer_tol = 1e-6;         // relative objective decrease
  int max_inner_iters = 50;        // per sub-problem per outer iteration
  double armijo_beta = 0.5;
  double armijo_sigma = 1e-4;
  double initial_step = 1.0;
  int n_restarts = 5;
  std::uint64_t rng_seed = 0;
  double epsilon_floor = 1e-10;
  int n_threads = 1;               // restarts run concurrently when > 1

  DivergenceConfig divergence() const { return {epsilon_floor}; }
  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

using Rng = std::mt19937_64;

/// Seed of the rng stream for restart `restart` under base seed `seed`.
std::uint64_t restart_seed(std::uint64_t seed, int restart);

/// Random feasible starting point: A columns uniform then projected onto the
/// scaled simplex, b = half the row means of X, W uniform on the supports.
FactorModel init_model(const CountMatrix& X, const SupportSets& supports, const SolverConfig& cfg, Rng& rng);

/// One inexact W sub-problem solve (A, b fixed). Returns the new W.
Matrix w_step(const CountMatrix& X, const FactorModel& model, const SupportSets& supports, const SolverConfig& cfg);

/// One inexact joint (A, b) sub-problem solve (W fixed). Returns the new (A, b).
std::pair<Matrix, Vector> a_b_step(const CountMatrix& X, const FactorModel& model, const SolverConfig& cfg);

struct FitResult {
  FactorModel model;
  SolveReport report;
};

/// Alternating minimization from `n_restarts` random starts; keeps the lowest
/// final divergence (ties go to the lowest restart index).
FitResult fit(const CountMatrix& X, const SupportSets& supports, const SolverConfig& cfg);

/// Loadings of new columns for a frozen (A, b). Without supports only the box
/// [0, 1] constrains the loadings.
Matrix transform(const CountMatrix& X_new, const FactorModel& model, const SolverConfig& cfg);
Matrix transform(const CountMatrix& X_new, const FactorModel& model, const SupportSets& supports,
                 const SolverConfig& cfg);

}  // namespace cnmf
