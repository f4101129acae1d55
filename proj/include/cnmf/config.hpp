#pragma once

#include "cnmf/datagen.hpp"
#include "cnmf/evaluation.hpp"
#include "cnmf/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cnmf {

struct EvalConfig {
  int n_folds = 5;
  std::vector<double> strengths{1e-3, 1e-2, 1e-1, 1.0};
  Index top_k = 15;
  Index min_terms = 5;
  double zero_tol = 1e-12;
  std::vector<double> lambdas{0.1, 0.4, 1.0};
  std::string mode = "loadings";
};

struct RunPaths {
  std::string x, supports, labels, features, model, out;
};

/// Everything a run needs, as one JSON document:
///
///   { "seed": 0, "deterministic": true,
///     "solver": { "lambda", "simplex", "max_outer_iters", "outer_tol", "max_inner_iters",
///                 "armijo_beta", "armijo_sigma", "initial_step", "restarts",
///                 "epsilon_floor", "threads" },
///     "gen":    { "n_features", "n_columns", "n_conditions", "lambda", "support_density",
///                 "phenotype_support_size", "overlap", "bias_scale",
///                 "labels": { "weight_scale", "noise" } },
///     "eval":   { "folds", "strengths", "top_k", "min_terms", "zero_tol", "lambdas", "mode" },
///     "paths":  { "x", "supports", "labels", "features", "model", "out" } }
///
/// Every key is optional; unknown keys are rejected. The solver's condition
/// count is taken from the support file at fit time.
struct RunConfig {
  std::uint64_t seed = 0;
  bool deterministic = true;
  SolverConfig solver;
  GenConfig gen{.label_rule = LabelRule{}};
  EvalConfig eval;
  RunPaths paths;

  /// Throws ConfigError naming the offending key.
  static RunConfig from_json_text(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);

  /// Canonical JSON of all settings except paths.
  std::string canonical_json() const;
  /// FNV-1a 64 of canonical_json(), as 16 hex digits.
  std::string hash() const;

  SolverConfig solver_config() const;
};

}  // namespace cnmf
