#include "cnmf/solver.hpp"

#include "cnmf/error.hpp"
#include "cnmf/projections.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <thread>

namespace cnmf {

namespace {

// Backtracking gives up below kMinStep; carried-over steps never exceed kMaxStep.
constexpr double kMinStep = 1e-20;
constexpr double kMaxStep = 1e8;

struct PgdSettings {
  int max_iters;
  double rel_tol;
  double beta;
  double sigma;
};

PgdSettings inner_settings(const SolverConfig& cfg) {
  return {cfg.max_inner_iters, cfg.outer_tol / 10.0, cfg.armijo_beta, cfg.armijo_sigma};
}

double relative_decrease(double before, double after) {
  return (before - after) / std::max(std::abs(before), std::numeric_limits<double>::min());
}

double total_objective(const CountMatrix& X, const Matrix& A, const Vector& b, const Matrix& W,
                       const DivergenceConfig& div) {
  ColumnObjective obj(X, A, b, div);
  double total = 0.0;
  for (Index j = 0; j < X.n_columns(); ++j) total += obj.value(j, W.col(j));
  return total;
}

void require_finite(double f, const char* where) {
  if (!std::isfinite(f)) {
    throw NumericError(std::string("non-finite objective in ") + where + "; check epsilon_floor and inputs");
  }
}

// Projected gradient on each loading column independently. The W sub-problem
// is separable over columns, so each column keeps its own step size.
// `steps` holds the per-column step to try first and is updated in place.
void solve_loadings(const ColumnObjective& obj, Matrix& W, const SupportSets* supports, const PgdSettings& s,
                    std::vector<double>& steps) {
  const Index K = W.rows();
  std::vector<Index> all(static_cast<std::size_t>(K));
  std::iota(all.begin(), all.end(), Index{0});

  Vector grad(K);
  Vector cand(K);
  for (Index j = 0; j < W.cols(); ++j) {
    std::span<const Index> support = supports ? (*supports)[j] : std::span<const Index>(all);
    if (support.empty()) continue;

    Vector w = W.col(j);
    double f = obj.value_and_gradient(j, w, grad);
    require_finite(f, "loading update");
    double& step = steps[static_cast<std::size_t>(j)];

    for (int it = 0; it < s.max_iters; ++it) {
      double t = step;
      bool accepted = false;
      bool stationary = false;
      double f_cand = f;
      for (; t >= kMinStep; t *= s.beta) {
        cand = project_box_support(w - t * grad, support);
        if (cand == w) {
          stationary = true;
          break;
        }
        const double decrease = grad.dot(w - cand);
        f_cand = obj.value(j, cand);
        if (std::isfinite(f_cand) && f_cand <= f - s.sigma * decrease) {
          accepted = true;
          break;
        }
      }
      if (!accepted || stationary) break;
      const double rel = relative_decrease(f, f_cand);
      w = cand;
      step = std::min(t / s.beta, kMaxStep);
      if (rel < s.rel_tol) break;
      f = obj.value_and_gradient(j, w, grad);
    }
    W.col(j) = w;
  }
}

void project_phenotypes(Matrix& A, const ScaledSimplex* simplex) {
  for (Index k = 0; k < A.cols(); ++k) {
    A.col(k) = simplex ? project_scaled_simplex(A.col(k), *simplex) : project_nonneg(A.col(k));
  }
}

// Given A and W the bias terms decouple: row i of the objective depends on
// b_i alone, up to a constant.
class BiasRows {
 public:
  BiasRows(const CountMatrix& X, const Matrix& A, const Matrix& W, double eps)
      : X_(X), eps_(eps), n_(static_cast<double>(X.n_columns())) {
    row_total_ = A * W.rowwise().sum();
    z_.reserve(X.nnz());
    for (Index j = 0; j < X.n_columns(); ++j) {
      for (const auto& e : X.column(j)) z_.push_back(A.row(e.row).dot(W.col(j)));
    }
  }

  void evaluate(const Vector& b, Vector& value, Vector* grad) const {
    value = row_total_ + n_ * b;
    if (grad) grad->setConstant(b.size(), n_);
    std::size_t n = 0;
    for (const auto& e : X_.entries()) {
      const double y = z_[n++] + b(e.row);
      value(e.row) -= e.value * std::log(std::max(y, eps_));
      if (grad && y > eps_) (*grad)(e.row) -= e.value / y;
    }
  }

 private:
  const CountMatrix& X_;
  double eps_;
  double n_;
  Vector row_total_;
  std::vector<double> z_;
};

struct PhenotypeSteps {
  double a;
  std::vector<double> b;

  PhenotypeSteps(Index d, double initial) : a(initial), b(static_cast<std::size_t>(d), initial) {}
};

// One projected gradient step per bias entry, each with its own backtracking.
Vector bias_step(const BiasRows& rows, const Vector& b, const PgdSettings& s, std::vector<double>& steps) {
  const Index d = b.size();
  Vector value(d), grad(d), cand_value(d);
  rows.evaluate(b, value, &grad);

  Vector cand = b;
  std::vector<double> t(steps);
  std::vector<char> active(static_cast<std::size_t>(d), 1);
  bool any = true;
  while (any) {
    any = false;
    for (Index i = 0; i < d; ++i) {
      const auto u = static_cast<std::size_t>(i);
      if (active[u]) cand(i) = std::max(0.0, b(i) - t[u] * grad(i));
    }
    rows.evaluate(cand, cand_value, nullptr);
    for (Index i = 0; i < d; ++i) {
      const auto u = static_cast<std::size_t>(i);
      if (!active[u]) continue;
      if (cand(i) == b(i)) {
        active[u] = 0;
      } else if (std::isfinite(cand_value(i)) && cand_value(i) <= value(i) - s.sigma * grad(i) * (b(i) - cand(i))) {
        steps[u] = std::min(t[u] / s.beta, kMaxStep);
        active[u] = 0;
      } else if ((t[u] *= s.beta) < kMinStep) {
        cand(i) = b(i);
        active[u] = 0;
      }
      any = any || active[u];
    }
  }
  return cand;
}

// Joint sub-problem over (A, b): each inner iteration takes a projected
// gradient step on A, then one on b.
void solve_phenotypes(const CountMatrix& X, Matrix& A, Vector& b, const Matrix& W, const SolverConfig& cfg,
                      const PgdSettings& s, PhenotypeSteps& steps) {
  const DivergenceConfig div = cfg.divergence();
  std::optional<ScaledSimplex> simplex;
  if (cfg.simplex_enabled) simplex.emplace(A.rows(), cfg.lambda);

  FactorModel current{A, W, b, cfg.lambda, cfg.simplex_enabled};
  double f = total_objective(X, current.A, current.b, W, div);
  require_finite(f, "phenotype update");

  Matrix A_cand;
  for (int it = 0; it < s.max_iters; ++it) {
    const double f_start = f;

    const Matrix gA = gradients(X, current, div).A;
    for (double t = steps.a; t >= kMinStep; t *= s.beta) {
      A_cand = current.A - t * gA;
      project_phenotypes(A_cand, simplex ? &*simplex : nullptr);
      if (A_cand == current.A) break;
      const double decrease = (gA.array() * (current.A - A_cand).array()).sum();
      const double f_cand = total_objective(X, A_cand, current.b, W, div);
      if (std::isfinite(f_cand) && f_cand <= f - s.sigma * decrease) {
        current.A.swap(A_cand);
        f = f_cand;
        steps.a = std::min(t / s.beta, kMaxStep);
        break;
      }
    }

    const BiasRows rows(X, current.A, W, div.epsilon_floor);
    Vector b_cand = bias_step(rows, current.b, s, steps.b);
    const double f_b = total_objective(X, current.A, b_cand, W, div);
    if (f_b <= f) {
      current.b.swap(b_cand);
      f = f_b;
    }

    if (f == f_start || relative_decrease(f_start, f) < s.rel_tol) break;
  }
  A = std::move(current.A);
  b = std::move(current.b);
}

void require_consistent(const CountMatrix& X, const SupportSets& supports, const SolverConfig& cfg) {
  if (X.n_features() == 0) throw DimensionError("X has no features");
  if (X.n_columns() == 0) throw DimensionError("X has no columns");
  if (supports.n_columns() != X.n_columns()) {
    throw DimensionError("support sets cover " + std::to_string(supports.n_columns()) + " columns but X has " +
                         std::to_string(X.n_columns()));
  }
  if (supports.n_conditions() != cfg.n_conditions) {
    throw DimensionError("support sets range over " + std::to_string(supports.n_conditions()) +
                         " conditions but the solver is configured for " + std::to_string(cfg.n_conditions));
  }
}

struct RestartOutcome {
  FactorModel model;
  std::vector<double> trace;
  int outer_iterations = 0;
  bool converged = false;
  double max_violation = 0.0;
};

RestartOutcome run_restart(const CountMatrix& X, const SupportSets& supports, const SolverConfig& cfg, int restart) {
  Rng rng(restart_seed(cfg.rng_seed, restart));
  RestartOutcome out;
  out.model = init_model(X, supports, cfg, rng);
  FactorModel& m = out.model;
  const DivergenceConfig div = cfg.divergence();
  const PgdSettings s = inner_settings(cfg);

  std::vector<double> w_steps(static_cast<std::size_t>(X.n_columns()), cfg.initial_step);
  PhenotypeSteps ab_steps(X.n_features(), cfg.initial_step);

  double f = total_objective(X, m.A, m.b, m.W, div);
  require_finite(f, "initial model");
  out.trace.push_back(f);
  out.max_violation = check_feasibility(m, supports).max_violation();

  for (int t = 0; t < cfg.max_outer_iters; ++t) {
    // A step that collapsed in one round must not throttle the next.
    for (double& w : w_steps) w = std::max(w, cfg.initial_step);
    for (double& v : ab_steps.b) v = std::max(v, cfg.initial_step);
    ab_steps.a = std::max(ab_steps.a, cfg.initial_step);
    {
      ColumnObjective obj(X, m.A, m.b, div);
      solve_loadings(obj, m.W, &supports, s, w_steps);
    }
    solve_phenotypes(X, m.A, m.b, m.W, cfg, s, ab_steps);

    const double f_new = total_objective(X, m.A, m.b, m.W, div);
    out.trace.push_back(f_new);
    out.max_violation = std::max(out.max_violation, check_feasibility(m, supports).max_violation());
    out.outer_iterations = t + 1;
    const double rel = relative_decrease(f, f_new);
    f = f_new;
    if (rel < cfg.outer_tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be positive");
  if (n_conditions < 1) throw ConfigError("n_conditions must be at least 1");
  if (max_outer_iters < 1) throw ConfigError("max_outer_iters must be at least 1");
  if (max_inner_iters < 1) throw ConfigError("max_inner_iters must be at least 1");
  if (!(outer_tol >= 0.0)) throw ConfigError("outer_tol must be non-negative");
  if (!(armijo_beta > 0.0 && armijo_beta < 1.0)) throw ConfigError("armijo_beta must lie in (0, 1)");
  if (!(armijo_sigma > 0.0 && armijo_sigma <= 0.5)) throw ConfigError("armijo_sigma must lie in (0, 0.5]");
  if (!(initial_step > 0.0) || !std::isfinite(initial_step)) throw ConfigError("initial_step must be positive");
  if (n_restarts < 1) throw ConfigError("n_restarts must be at least 1");
  if (!(epsilon_floor > 0.0)) throw ConfigError("epsilon_floor must be positive");
  if (n_threads < 1) throw ConfigError("n_threads must be at least 1");
}

std::uint64_t restart_seed(std::uint64_t seed, int restart) {
  // splitmix64 finalizer over (seed, restart)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(restart) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

FactorModel init_model(const CountMatrix& X, const SupportSets& supports, const SolverConfig& cfg, Rng& rng) {
  cfg.validate();
  if (X.n_features() == 0) throw DimensionError("X has no features");
  if (supports.n_columns() != X.n_columns()) {
    throw DimensionError("support sets cover " + std::to_string(supports.n_columns()) + " columns but X has " +
                         std::to_string(X.n_columns()));
  }
  const Index d = X.n_features();
  const Index K = cfg.n_conditions;
  const Index N = X.n_columns();
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  FactorModel m;
  m.lambda = cfg.lambda;
  m.simplex_enabled = cfg.simplex_enabled;
  m.A.resize(d, K);
  const ScaledSimplex simplex(d, cfg.lambda);
  for (Index k = 0; k < K; ++k) {
    Vector col(d);
    for (Index i = 0; i < d; ++i) col(i) = unit(rng);
    m.A.col(k) = project_scaled_simplex(col, simplex);
  }
  m.b = 0.5 * X.row_means();
  m.W = Matrix::Zero(K, N);
  for (Index j = 0; j < N; ++j) {
    for (Index k : supports[j]) m.W(k, j) = unit(rng);
  }
  return m;
}

Matrix w_step(const CountMatrix& X, const FactorModel& model, const SupportSets& supports, const SolverConfig& cfg) {
  cfg.validate();
  check_feasibility(model, supports);  // shape checks
  ColumnObjective obj(X, model.A, model.b, cfg.divergence());
  if (model.W.cols() != X.n_columns()) throw DimensionError("W and X disagree on the number of columns");
  Matrix W = model.W;
  std::vector<double> steps(static_cast<std::size_t>(W.cols()), cfg.initial_step);
  solve_loadings(obj, W, &supports, inner_settings(cfg), steps);
  return W;
}

std::pair<Matrix, Vector> a_b_step(const CountMatrix& X, const FactorModel& model, const SolverConfig& cfg) {
  cfg.validate();
  model.check_shapes();
  if (model.A.rows() != X.n_features() || model.W.cols() != X.n_columns()) {
    throw DimensionError("model shape does not match X");
  }
  SolverConfig local = cfg;
  local.lambda = model.lambda;
  local.simplex_enabled = model.simplex_enabled;
  Matrix A = model.A;
  Vector b = model.b;
  PhenotypeSteps steps(X.n_features(), cfg.initial_step);
  solve_phenotypes(X, A, b, model.W, local, inner_settings(cfg), steps);
  return {std::move(A), std::move(b)};
}

FitResult fit(const CountMatrix& X, const SupportSets& supports, const SolverConfig& cfg) {
  cfg.validate();
  require_consistent(X, supports, cfg);

  const auto n = static_cast<std::size_t>(cfg.n_restarts);
  std::vector<RestartOutcome> outcomes(n);
  std::vector<std::exception_ptr> errors(n);
  auto work = [&](std::size_t r) {
    try {
      outcomes[r] = run_restart(X, supports, cfg, static_cast<int>(r));
    } catch (...) {
      errors[r] = std::current_exception();
    }
  };
  if (cfg.n_threads > 1 && n > 1) {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (int t = 0; t < std::min<int>(cfg.n_threads, cfg.n_restarts); ++t) {
      pool.emplace_back([&] {
        for (std::size_t r = next++; r < n; r = next++) work(r);
      });
    }
  } else {
    for (std::size_t r = 0; r < n; ++r) work(r);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  FitResult result;
  std::size_t best = 0;
  for (std::size_t r = 0; r < n; ++r) {
    result.report.restart_objectives.push_back(outcomes[r].trace.back());
    if (outcomes[r].trace.back() < outcomes[best].trace.back()) best = r;
  }
  RestartOutcome& chosen = outcomes[best];
  result.model = std::move(chosen.model);
  result.report.objective_trace = std::move(chosen.trace);
  result.report.outer_iterations = chosen.outer_iterations;
  result.report.selected_restart = static_cast<int>(best);
  result.report.converged = chosen.converged;
  result.report.feasibility_max_violation = chosen.max_violation;
  return result;
}

namespace {

Matrix transform_impl(const CountMatrix& X_new, const FactorModel& model, const SupportSets* supports,
                      const SolverConfig& cfg) {
  cfg.validate();
  model.check_shapes();
  if (X_new.n_features() != model.n_features()) {
    throw DimensionError("new columns have " + std::to_string(X_new.n_features()) + " features but the model has " +
                         std::to_string(model.n_features()));
  }
  const Index K = model.n_conditions();
  const Index N = X_new.n_columns();
  if (supports && (supports->n_columns() != N || supports->n_conditions() != K)) {
    throw DimensionError("support sets do not match the new columns");
  }
  Matrix W = Matrix::Zero(K, N);
  for (Index j = 0; j < N; ++j) {
    if (supports) {
      for (Index k : (*supports)[j]) W(k, j) = 0.5;
    } else {
      W.col(j).setConstant(0.5);
    }
  }
  ColumnObjective obj(X_new, model.A, model.b, cfg.divergence());
  PgdSettings s = inner_settings(cfg);
  s.max_iters = cfg.max_outer_iters * cfg.max_inner_iters;
  s.rel_tol = cfg.outer_tol * 1e-3;
  std::vector<double> steps(static_cast<std::size_t>(N), cfg.initial_step);
  solve_loadings(obj, W, supports, s, steps);
  return W;
}

}  // namespace

Matrix transform(const CountMatrix& X_new, const FactorModel& model, const SolverConfig& cfg) {
  return transform_impl(X_new, model, nullptr, cfg);
}

Matrix transform(const CountMatrix& X_new, const FactorModel& model, const SupportSets& supports,
                 const SolverConfig& cfg) {
  return transform_impl(X_new, model, &supports, cfg);
}

}  // namespace cnmf
