#include "cnmf/config.hpp"

#include "cnmf/error.hpp"
#include "cnmf/io.hpp"

#include <json.hpp>

#include <cstdio>
#include <functional>
#include <map>

namespace cnmf {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

struct WrongType {};

// Applies `handlers` to the members of `obj`; any other key is an error.
void read_object(const json& obj, const std::string& prefix,
                 const std::map<std::string, std::function<void(const json&)>>& handlers) {
  if (!obj.is_object()) throw ConfigError("configuration key '" + prefix + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    const auto it = handlers.find(key);
    if (it == handlers.end()) throw ConfigError("unknown configuration key '" + path + "'");
    try {
      it->second(value);
    } catch (const WrongType&) {
      throw ConfigError("configuration key '" + path + "' has the wrong type");
    } catch (const json::exception&) {
      throw ConfigError("configuration key '" + path + "' has the wrong type");
    }
  }
}

template <typename T>
std::function<void(const json&)> into(T& field) {
  return [&field](const json& v) {
    if constexpr (std::is_same_v<T, bool>) {
      field = v.get<bool>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw WrongType{};
      field = v.get<T>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw WrongType{};
      field = v.get<T>();
    } else {
      field = v.get<T>();
    }
  };
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("configuration is not valid JSON: ") + e.what());
  }
  RunConfig c;
  auto& s = c.solver;
  auto& g = c.gen;
  auto& e = c.eval;
  read_object(doc, "", {
      {"seed", into(c.seed)},
      {"deterministic", into(c.deterministic)},
      {"solver", [&](const json& v) {
         read_object(v, "solver", {
             {"lambda", into(s.lambda)},
             {"simplex", into(s.simplex_enabled)},
             {"max_outer_iters", into(s.max_outer_iters)},
             {"outer_tol", into(s.outer_tol)},
             {"max_inner_iters", into(s.max_inner_iters)},
             {"armijo_beta", into(s.armijo_beta)},
             {"armijo_sigma", into(s.armijo_sigma)},
             {"initial_step", into(s.initial_step)},
             {"restarts", into(s.n_restarts)},
             {"epsilon_floor", into(s.epsilon_floor)},
             {"threads", into(s.n_threads)},
         });
       }},
      {"gen", [&](const json& v) {
         read_object(v, "gen", {
             {"n_features", into(g.n_features)},
             {"n_columns", into(g.n_columns)},
             {"n_conditions", into(g.n_conditions)},
             {"lambda", into(g.lambda)},
             {"support_density", into(g.support_density)},
             {"phenotype_support_size", into(g.phenotype_support_size)},
             {"overlap", into(g.overlap)},
             {"bias_scale", into(g.bias_scale)},
             {"labels", [&](const json& lv) {
                if (lv.is_null()) {
                  g.label_rule.reset();
                  return;
                }
                LabelRule rule;
                read_object(lv, "gen.labels", {
                    {"weight_scale", into(rule.weight_scale)},
                    {"noise", into(rule.noise)},
                });
                g.label_rule = rule;
              }},
         });
       }},
      {"eval", [&](const json& v) {
         read_object(v, "eval", {
             {"folds", into(e.n_folds)},
             {"strengths", into(e.strengths)},
             {"top_k", into(e.top_k)},
             {"min_terms", into(e.min_terms)},
             {"zero_tol", into(e.zero_tol)},
             {"lambdas", into(e.lambdas)},
             {"mode", into(e.mode)},
         });
       }},
      {"paths", [&](const json& v) {
         auto& p = c.paths;
         read_object(v, "paths", {
             {"x", into(p.x)},
             {"supports", into(p.supports)},
             {"labels", into(p.labels)},
             {"features", into(p.features)},
             {"model", into(p.model)},
             {"out", into(p.out)},
         });
       }},
  });

  // Range checks; n_conditions is only known once supports are read.
  SolverConfig probe = c.solver;
  probe.n_conditions = 1;
  probe.validate();
  c.gen.validate();
  if (e.n_folds < 2) throw ConfigError("eval.folds must be at least 2");
  if (e.strengths.empty()) throw ConfigError("eval.strengths must not be empty");
  if (e.lambdas.empty()) throw ConfigError("eval.lambdas must not be empty");
  for (double l : e.lambdas) {
    if (!(l > 0.0)) throw ConfigError("eval.lambdas must be positive");
  }
  if (e.top_k < 1) throw ConfigError("eval.top_k must be at least 1");
  try {
    parse_feature_mode(e.mode);
  } catch (const std::invalid_argument& err) {
    throw ConfigError(std::string("eval.mode: ") + err.what());
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const ParseError&) {
    throw ConfigError("cannot read configuration file " + path.string());
  }
  return from_json_text(text);
}

std::string RunConfig::canonical_json() const {
  ojson doc;
  doc["seed"] = seed;
  doc["deterministic"] = deterministic;
  doc["solver"] = {
      {"lambda", solver.lambda},
      {"simplex", solver.simplex_enabled},
      {"max_outer_iters", solver.max_outer_iters},
      {"outer_tol", solver.outer_tol},
      {"max_inner_iters", solver.max_inner_iters},
      {"armijo_beta", solver.armijo_beta},
      {"armijo_sigma", solver.armijo_sigma},
      {"initial_step", solver.initial_step},
      {"restarts", solver.n_restarts},
      {"epsilon_floor", solver.epsilon_floor},
  };
  ojson gen_doc = {
      {"n_features", gen.n_features},
      {"n_columns", gen.n_columns},
      {"n_conditions", gen.n_conditions},
      {"lambda", gen.lambda},
      {"support_density", gen.support_density},
      {"phenotype_support_size", gen.phenotype_support_size},
      {"overlap", gen.overlap},
      {"bias_scale", gen.bias_scale},
  };
  gen_doc["labels"] = gen.label_rule ? ojson{{"weight_scale", gen.label_rule->weight_scale}, {"noise", gen.label_rule->noise}}
                                     : ojson(nullptr);
  doc["gen"] = gen_doc;
  doc["eval"] = {
      {"folds", eval.n_folds},
      {"strengths", eval.strengths},
      {"top_k", eval.top_k},
      {"min_terms", eval.min_terms},
      {"zero_tol", eval.zero_tol},
      {"lambdas", eval.lambdas},
      {"mode", eval.mode},
  };
  return doc.dump();
}

std::string RunConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_json()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SolverConfig RunConfig::solver_config() const {
  SolverConfig s = solver;
  s.rng_seed = seed;
  return s;
}

}  // namespace cnmf
