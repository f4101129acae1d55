#include "cnmf/config.hpp"
#include "cnmf/datagen.hpp"
#include "cnmf/error.hpp"
#include "cnmf/evaluation.hpp"
#include "cnmf/io.hpp"
#include "cnmf/objective.hpp"
#include "cnmf/solver.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using namespace cnmf;

namespace {

enum Exit { kOk = 0, kRuntime = 1, kUsage = 2 };

// Options shared by every command that builds a RunConfig.
struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  std::optional<int> restarts;
  bool no_simplex = false;
  bool deterministic = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config, "JSON configuration file");
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--lambda", lambda, "phenotype column sum");
    cmd->add_option("--restarts", restarts, "number of random restarts");
    cmd->add_flag("--no-simplex", no_simplex, "drop the simplex constraint (NMF+support)");
    cmd->add_flag("--deterministic", deterministic, "fixed seed even when none is given");
  }

  RunConfig resolve() const {
    RunConfig cfg = config.empty() ? RunConfig::from_json_text("{}") : RunConfig::load(config);
    if (deterministic) cfg.deterministic = true;
    if (seed) {
      cfg.seed = *seed;
    } else if (!cfg.deterministic) {
      cfg.seed = std::random_device{}();
    }
    if (lambda) cfg.solver.lambda = *lambda;
    if (restarts) cfg.solver.n_restarts = *restarts;
    if (no_simplex) cfg.solver.simplex_enabled = false;
    SolverConfig probe = cfg.solver;
    probe.n_conditions = 1;
    probe.validate();
    return cfg;
  }
};

std::string pick(const std::string& flag, const std::string& configured, const char* what) {
  if (!flag.empty()) return flag;
  if (!configured.empty()) return configured;
  throw ConfigError(std::string("missing required path: ") + what);
}

void write_json(const fs::path& path, const ojson& doc) { io::write_text(path, doc.dump(2) + "\n"); }

ojson sparsity_json(const SparsityReport& s) {
  return {{"lambda", s.lambda},
          {"median_nnz", s.median_nnz},
          {"third_quartile_nnz", s.third_quartile_nnz},
          {"min_terms_ok", s.min_terms_ok},
          {"per_column_nnz", s.per_column_nnz}};
}

ojson terms_json(const std::vector<RankedTerm>& terms) {
  ojson out = ojson::array();
  for (const auto& t : terms) out.push_back({{"index", t.index}, {"name", t.name}, {"weight", t.weight}});
  return out;
}

std::vector<std::string> feature_names_for(const std::string& path, Index d) {
  if (path.empty()) return io::default_names("f", d);
  auto names = io::load_names(path);
  if (static_cast<Index>(names.size()) != d) {
    throw DimensionError(path + " holds " + std::to_string(names.size()) + " names but X has " + std::to_string(d) +
                         " features");
  }
  return names;
}

std::vector<std::string> column_ids_for(const CountMatrix& X) {
  return X.column_ids() ? *X.column_ids() : io::default_names("col", X.n_columns());
}

// ---- gen

int cmd_gen(const Common& common, const std::string& out_flag) {
  const RunConfig cfg = common.resolve();
  const fs::path out = pick(out_flag, cfg.paths.out, "--out");
  const PlantedInstance inst = generate(cfg.gen, cfg.seed);

  const auto features = io::default_names("f", cfg.gen.n_features);
  const auto conditions = io::default_names("c", cfg.gen.n_conditions);
  const auto columns = io::default_names("col", cfg.gen.n_columns);

  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + out.string());
  io::save_count_matrix(out / "X.txt", inst.X);
  io::save_supports(out / "supports.txt", inst.supports_true);
  io::save_names(out / "features.txt", features);
  io::save_table(out / "A_true.tsv", {"feature", conditions, features, inst.A_true});
  io::save_table(out / "W_true.tsv", {"column", conditions, columns, inst.W_true.transpose()});
  io::save_table(out / "b_true.tsv", {"feature", {"bias"}, features, inst.b_true});
  if (inst.labels) io::save_labels(out / "labels.txt", *inst.labels);

  ojson manifest;
  manifest["format"] = "cnmf-instance";
  manifest["seed"] = cfg.seed;
  manifest["config_hash"] = cfg.hash();
  manifest["n_features"] = cfg.gen.n_features;
  manifest["n_columns"] = cfg.gen.n_columns;
  manifest["n_conditions"] = cfg.gen.n_conditions;
  manifest["lambda"] = cfg.gen.lambda;
  manifest["planted_divergence"] = i_divergence(inst.X, inst.planted_model());
  if (inst.labels) {
    manifest["label_weights"] = std::vector<double>(inst.label_weights.begin(), inst.label_weights.end());
    manifest["label_intercept"] = inst.label_intercept;
  }
  manifest["config"] = ojson::parse(cfg.canonical_json());
  write_json(out / "manifest.json", manifest);

  std::printf("wrote instance d=%lld N=%lld K=%lld nnz=%zu to %s\n", static_cast<long long>(cfg.gen.n_features),
              static_cast<long long>(cfg.gen.n_columns), static_cast<long long>(cfg.gen.n_conditions), inst.X.nnz(),
              out.string().c_str());
  return kOk;
}

// ---- fit

struct FitPaths {
  std::string x, supports, features, out;
};

int cmd_fit(const Common& common, const FitPaths& p) {
  const RunConfig cfg = common.resolve();
  const std::string x_path = pick(p.x, cfg.paths.x, "--x");
  const std::string s_path = pick(p.supports, cfg.paths.supports, "--supports");
  const fs::path out = pick(p.out, cfg.paths.model, "--out");

  // Everything is read and checked before anything is written.
  const CountMatrix X = io::load_count_matrix(x_path);
  const SupportSets supports = io::load_supports(s_path);
  const auto features = feature_names_for(p.features.empty() ? cfg.paths.features : p.features, X.n_features());
  SolverConfig scfg = cfg.solver_config();
  scfg.n_conditions = supports.n_conditions();
  const FitResult result = fit(X, supports, scfg);
  const SparsityReport sp = sparsity(result.model, cfg.eval.zero_tol, cfg.eval.min_terms);

  io::ModelFiles files{result.model, features, io::default_names("c", scfg.n_conditions), column_ids_for(X),
                       cfg.hash()};
  io::save_model(out, files);

  const SolveReport& r = result.report;
  ojson report;
  report["final_divergence"] = r.objective_trace.back();
  report["outer_iterations"] = r.outer_iterations;
  report["converged"] = r.converged;
  report["selected_restart"] = r.selected_restart;
  report["restart_objectives"] = r.restart_objectives;
  report["feasibility_max_violation"] = r.feasibility_max_violation;
  report["objective_trace"] = r.objective_trace;
  report["sparsity"] = sparsity_json(sp);
  report["seed"] = cfg.seed;
  report["config_hash"] = cfg.hash();
  write_json(out / "report.json", report);

  std::printf("final divergence  %.6f\n", r.objective_trace.back());
  std::printf("median nnz        %g\n", sp.median_nnz);
  std::printf("outer iterations  %d%s\n", r.outer_iterations, r.converged ? "" : " (not converged)");
  return kOk;
}

// ---- transform

struct TransformPaths {
  std::string x, model, supports, out;
};

int cmd_transform(const Common& common, const TransformPaths& p) {
  const RunConfig cfg = common.resolve();
  const CountMatrix X = io::load_count_matrix(pick(p.x, cfg.paths.x, "--x"));
  const io::ModelFiles files = io::load_model(pick(p.model, cfg.paths.model, "--model"));
  const std::string out = pick(p.out, cfg.paths.out, "--out");

  SolverConfig scfg = cfg.solver_config();
  scfg.n_conditions = files.model.n_conditions();
  Matrix W;
  if (p.supports.empty()) {
    W = transform(X, files.model, scfg);
  } else {
    W = transform(X, files.model, io::load_supports(p.supports), scfg);
  }
  io::save_table(out, {"column", files.condition_names, column_ids_for(X), W.transpose()});
  std::printf("wrote loadings for %lld columns to %s\n", static_cast<long long>(X.n_columns()), out.c_str());
  return kOk;
}

// ---- eval

struct EvalArgs {
  std::string x, supports, labels, model, features, out, mode;
  std::vector<double> lambdas;
  std::optional<Index> top_k;
};

void maybe_write(const std::string& out, const ojson& doc) {
  if (!out.empty()) write_json(out, doc);
}

int eval_sparsity(const RunConfig& cfg, const EvalArgs& a) {
  const io::ModelFiles files = io::load_model(pick(a.model, cfg.paths.model, "--model"));
  const SparsityReport sp = sparsity(files.model, cfg.eval.zero_tol, cfg.eval.min_terms);
  std::printf("%-12s %s\n", "condition", "nnz");
  for (std::size_t k = 0; k < sp.per_column_nnz.size(); ++k) {
    std::printf("%-12s %lld\n", files.condition_names[k].c_str(), static_cast<long long>(sp.per_column_nnz[k]));
  }
  std::printf("median %g  q3 %g  min_terms_ok %s\n", sp.median_nnz, sp.third_quartile_nnz,
              sp.min_terms_ok ? "yes" : "no");
  maybe_write(a.out, sparsity_json(sp));
  return kOk;
}

int eval_sweep(const RunConfig& cfg, const EvalArgs& a) {
  const CountMatrix X = io::load_count_matrix(pick(a.x, cfg.paths.x, "--x"));
  const SupportSets supports = io::load_supports(pick(a.supports, cfg.paths.supports, "--supports"));
  const std::vector<double>& lambdas = a.lambdas.empty() ? cfg.eval.lambdas : a.lambdas;
  for (double l : lambdas) {
    if (!(l > 0.0)) throw ConfigError("--lambdas must be positive");
  }
  SolverConfig scfg = cfg.solver_config();
  scfg.n_conditions = supports.n_conditions();
  const auto rows = lambda_sweep(X, supports, lambdas, scfg);

  ojson doc = ojson::array();
  std::printf("%-10s %-16s %-8s %-8s\n", "lambda", "divergence", "median", "q3");
  bool failed = false;
  for (const auto& row : rows) {
    if (row.error) {
      failed = true;
      std::printf("%-10g failed: %s\n", row.lambda, row.error->c_str());
      doc.push_back({{"lambda", row.lambda}, {"error", *row.error}});
      continue;
    }
    std::printf("%-10g %-16.6f %-8g %-8g\n", row.lambda, row.divergence, row.sparsity.median_nnz,
                row.sparsity.third_quartile_nnz);
    ojson entry = sparsity_json(row.sparsity);
    entry["divergence"] = row.divergence;
    doc.push_back(entry);
  }
  maybe_write(a.out, {{"config_hash", cfg.hash()}, {"rows", doc}});
  return failed ? kRuntime : kOk;
}

int eval_predict(const RunConfig& cfg, const EvalArgs& a) {
  const CountMatrix X = io::load_count_matrix(pick(a.x, cfg.paths.x, "--x"));
  const SupportSets supports = io::load_supports(pick(a.supports, cfg.paths.supports, "--supports"));
  const std::vector<int> labels = io::load_labels(pick(a.labels, cfg.paths.labels, "--labels"));
  const FeatureMode mode = parse_feature_mode(a.mode.empty() ? cfg.eval.mode : a.mode);
  const auto features = feature_names_for(a.features.empty() ? cfg.paths.features : a.features, X.n_features());

  PredictConfig pc;
  pc.solver = cfg.solver_config();
  pc.solver.n_conditions = supports.n_conditions();
  pc.n_folds = cfg.eval.n_folds;
  pc.strengths = cfg.eval.strengths;
  pc.seed = cfg.seed;
  const PredictionReport rep = predict_eval(X, supports, labels, mode, pc);

  std::printf("mode %s, %zu folds\n", to_string(mode).c_str(), rep.per_fold.size());
  std::printf("%-6s %-8s %-8s %-8s %-8s\n", "fold", "auroc", "sens", "spec", "C");
  ojson folds = ojson::array();
  for (std::size_t f = 0; f < rep.per_fold.size(); ++f) {
    const FoldMetrics& m = rep.per_fold[f];
    std::printf("%-6zu %-8.4f %-8.4f %-8.4f %-8g\n", f, m.auroc, m.sensitivity, m.specificity, m.strength);
    folds.push_back(
        {{"auroc", m.auroc}, {"sensitivity", m.sensitivity}, {"specificity", m.specificity}, {"strength", m.strength}});
  }
  std::printf("mean   %.4f (sd %.4f)  sens %.4f  spec %.4f\n", rep.auroc.mean, rep.auroc.stddev, rep.sensitivity.mean,
              rep.specificity.mean);

  auto summary = [](const MetricSummary& s) { return ojson{{"mean", s.mean}, {"stddev", s.stddev}}; };
  ojson doc;
  doc["mode"] = to_string(mode);
  doc["auroc"] = summary(rep.auroc);
  doc["sensitivity"] = summary(rep.sensitivity);
  doc["specificity"] = summary(rep.specificity);
  doc["folds"] = folds;
  doc["chosen_strengths"] = rep.chosen_strengths;
  if (rep.nonzero_raw_feature_fraction) {
    doc["nonzero_raw_feature_fraction"] = *rep.nonzero_raw_feature_fraction;
    std::printf("nonzero raw-feature fraction %.4f\n", *rep.nonzero_raw_feature_fraction);
    const auto conditions = io::default_names("c", supports.n_conditions());
    const std::vector<double> w(rep.mean_weights.begin(), rep.mean_weights.end());
    const WeightTables tables = weight_inspection(w, features, conditions, a.top_k.value_or(cfg.eval.top_k));
    doc["top_loading_weights"] = terms_json(tables.loadings);
    doc["top_raw_weights"] = terms_json(tables.raw);
  }
  doc["config_hash"] = cfg.hash();
  maybe_write(a.out, doc);
  return kOk;
}

int eval_top_terms(const RunConfig& cfg, const EvalArgs& a) {
  const io::ModelFiles files = io::load_model(pick(a.model, cfg.paths.model, "--model"));
  const Index k = a.top_k.value_or(cfg.eval.top_k);
  if (k < 1) throw ConfigError("--top-k must be at least 1");
  const TopTerms top = top_terms(files.model, files.feature_names, k);
  ojson doc;
  for (std::size_t c = 0; c < top.per_condition.size(); ++c) {
    std::printf("%s:", files.condition_names[c].c_str());
    for (const auto& t : top.per_condition[c]) std::printf(" %s(%.4g)", t.name.c_str(), t.weight);
    std::printf("\n");
    doc[files.condition_names[c]] = terms_json(top.per_condition[c]);
  }
  if (top.truncated) std::printf("note: top-k exceeds the number of features\n");
  maybe_write(a.out, {{"truncated", top.truncated}, {"terms", doc}});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cnmf: phenotyping by support-constrained non-negative matrix factorization"};
  app.require_subcommand(1);

  Common common;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "generate a planted synthetic instance");
  common.attach(gen);
  gen->add_option("--out", gen_out, "output directory");

  FitPaths fp;
  auto* fitc = app.add_subcommand("fit", "fit a model");
  common.attach(fitc);
  fitc->add_option("--x", fp.x, "count matrix");
  fitc->add_option("--supports", fp.supports, "support sets");
  fitc->add_option("--features", fp.features, "feature names, one per line");
  fitc->add_option("--out", fp.out, "model directory to write");

  TransformPaths tp;
  auto* tr = app.add_subcommand("transform", "infer loadings of new columns");
  common.attach(tr);
  tr->add_option("--x", tp.x, "count matrix of new columns");
  tr->add_option("--model", tp.model, "model directory");
  tr->add_option("--supports", tp.supports, "optional support sets for the new columns");
  tr->add_option("--out", tp.out, "output table");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "evaluate models and features");
  ev->require_subcommand(1);
  const std::vector<std::string> eval_names{"sparsity", "sweep", "predict", "top-terms"};
  std::vector<CLI::App*> eval_cmds;
  for (const auto& name : eval_names) {
    auto* sub = ev->add_subcommand(name);
    common.attach(sub);
    sub->add_option("--out", ea.out, "JSON report");
    eval_cmds.push_back(sub);
  }
  eval_cmds[0]->add_option("--model", ea.model, "model directory");
  eval_cmds[1]->add_option("--x", ea.x, "count matrix");
  eval_cmds[1]->add_option("--supports", ea.supports, "support sets");
  eval_cmds[1]->add_option("--lambdas", ea.lambdas, "comma-separated lambda grid")->delimiter(',');
  eval_cmds[2]->add_option("--x", ea.x, "count matrix");
  eval_cmds[2]->add_option("--supports", ea.supports, "support sets");
  eval_cmds[2]->add_option("--labels", ea.labels, "binary labels");
  eval_cmds[2]->add_option("--features", ea.features, "feature names");
  eval_cmds[2]->add_option("--mode", ea.mode, "loadings, raw or augmented");
  eval_cmds[2]->add_option("--top-k", ea.top_k, "rows of the weight tables");
  eval_cmds[3]->add_option("--model", ea.model, "model directory");
  eval_cmds[3]->add_option("--top-k", ea.top_k, "terms per condition");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(common, gen_out);
    if (fitc->parsed()) return cmd_fit(common, fp);
    if (tr->parsed()) return cmd_transform(common, tp);
    const RunConfig cfg = common.resolve();
    if (eval_cmds[0]->parsed()) return eval_sparsity(cfg, ea);
    if (eval_cmds[1]->parsed()) return eval_sweep(cfg, ea);
    if (eval_cmds[2]->parsed()) return eval_predict(cfg, ea);
    return eval_top_terms(cfg, ea);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {  // ConfigError, DimensionError
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {  // IoError, NumericError and the rest
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
}
