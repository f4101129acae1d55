#include "cnmf/config.hpp"
#include "cnmf/datagen.hpp"
#include "cnmf/error.hpp"
#include "cnmf/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

using namespace cnmf;
namespace fs = std::filesystem;

namespace {

template <typename T, typename W, typename R>
std::string rewrite(const std::string& text, W write, R read) {
  std::istringstream is(text);
  const T value = read(is, "<test>");
  std::ostringstream os;
  write(os, value);
  return os.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cnmf_io_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

size_t parse_error_line(const std::function<void()>& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e.line();
  }
  ADD_FAILURE() << "no ParseError";
  return 0;
}

}  // namespace

TEST(FormatDouble, RoundTripsExactly) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int t = 0; t < 1000; ++t) {
    const double v = u(rng) * std::pow(10.0, t % 40 - 20);
    EXPECT_EQ(std::stod(io::format_double(v)), v);
  }
  EXPECT_EQ(io::format_double(0.5), "0.5");
  EXPECT_EQ(io::format_double(3.0), "3");
}

TEST(CountMatrixFormat, WriteReadWriteIsByteIdentical) {
  GenConfig g;
  g.n_features = 10;
  g.n_columns = 15;
  g.n_conditions = 2;
  g.phenotype_support_size = 3;
  const PlantedInstance inst = generate(g, 1);
  std::ostringstream os;
  io::write_count_matrix(os, inst.X);
  EXPECT_EQ(os.str().rfind("%%cnmf-matrix 10 15 ", 0), 0u);
  EXPECT_EQ(rewrite<CountMatrix>(os.str(), io::write_count_matrix, io::read_count_matrix), os.str());
  std::istringstream is(os.str());
  EXPECT_EQ(io::read_count_matrix(is).to_dense(), inst.X.to_dense());
}

TEST(CountMatrixFormat, NonIntegerValuesAndComments) {
  const std::string text = "%%cnmf-matrix 2 2 2\n% a comment\n1 1 0.10000000000000001\n\n2 2 3.25\n";
  std::istringstream is(text);
  const CountMatrix X = io::read_count_matrix(is);
  EXPECT_EQ(X.to_dense()(0, 0), 0.1);
  EXPECT_EQ(X.to_dense()(1, 1), 3.25);
}

TEST(CountMatrixFormat, MalformedInputsReportLines) {
  auto read = [](const std::string& text) {
    return [text] {
      std::istringstream is(text);
      io::read_count_matrix(is);
    };
  };
  EXPECT_EQ(parse_error_line(read("")), 1u);
  EXPECT_EQ(parse_error_line(read("%%matrix 2 2 1\n1 1 1\n")), 1u);
  EXPECT_EQ(parse_error_line(read("%%cnmf-matrix 2 2 1\n1 1\n")), 2u);
  EXPECT_EQ(parse_error_line(read("%%cnmf-matrix 2 2 2\n1 1 1\n3 1 1\n")), 3u);
  EXPECT_EQ(parse_error_line(read("%%cnmf-matrix 2 2 1\n1 1 -2\n")), 2u);
  EXPECT_EQ(parse_error_line(read("%%cnmf-matrix 2 2 1\n1 1 nan\n")), 2u);
  EXPECT_EQ(parse_error_line(read("%%cnmf-matrix 2 2 2\n1 1 1\n1 1 2\n")), 3u);
  EXPECT_EQ(parse_error_line(read("%%cnmf-matrix 2 2 2\n1 1 1\n")), 2u);
  EXPECT_EQ(parse_error_line(read("%%cnmf-matrix 2 2 1\n1 1 1 extra\n")), 2u);
}

TEST(SupportsFormat, RoundTripWithEmptySets) {
  const SupportSets s(3, {{0, 2}, {}, {1}, {}});
  std::ostringstream os;
  io::write_supports(os, s);
  EXPECT_EQ(os.str(), "%%cnmf-supports 4 3\n1 3\n\n2\n\n");
  std::istringstream is(os.str());
  EXPECT_EQ(io::read_supports(is), s);
  EXPECT_EQ(rewrite<SupportSets>(os.str(), io::write_supports, io::read_supports), os.str());
}

TEST(SupportsFormat, Malformed) {
  auto read = [](const std::string& text) {
    return [text] {
      std::istringstream is(text);
      io::read_supports(is);
    };
  };
  EXPECT_EQ(parse_error_line(read("%%cnmf-supports 2 2\n1\n3\n")), 3u);
  EXPECT_EQ(parse_error_line(read("%%cnmf-supports 2 2\n0\n1\n")), 2u);
  EXPECT_EQ(parse_error_line(read("%%cnmf-supports 2 2\n1\nx\n")), 3u);
  EXPECT_EQ(parse_error_line(read("%%cnmf-supports 3 2\n1\n2\n")), 3u);
  EXPECT_EQ(parse_error_line(read("%%cnmf-supports 1 2\n1\n2\n")), 3u);
}

TEST(LabelsFormat, RoundTripAndMalformed) {
  const std::vector<int> y{0, 1, 1, 0};
  std::ostringstream os;
  io::write_labels(os, y);
  std::istringstream is(os.str());
  EXPECT_EQ(io::read_labels(is), y);
  EXPECT_EQ(rewrite<std::vector<int>>(os.str(), io::write_labels, io::read_labels), os.str());
  std::istringstream bad("%%cnmf-labels 2\n0\n2\n");
  EXPECT_THROW(io::read_labels(bad), ParseError);
}

TEST(TableFormat, RoundTripIsExact) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1e3);
  io::Table t{"feature", {"c1", "c2", "c3"}, {"a", "b"}, Matrix(2, 3)};
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 3; ++j) t.values(i, j) = g(rng);
  std::ostringstream os;
  io::write_table(os, t);
  std::istringstream is(os.str());
  const io::Table back = io::read_table(is);
  EXPECT_EQ(back.values, t.values);
  EXPECT_EQ(back.row_names, t.row_names);
  EXPECT_EQ(back.column_names, t.column_names);
  EXPECT_EQ(back.corner, "feature");
  EXPECT_EQ(rewrite<io::Table>(os.str(), io::write_table, io::read_table), os.str());

  std::istringstream ragged("x\ta\tb\nr1\t1\n");
  EXPECT_EQ(parse_error_line([&] { io::read_table(ragged); }), 2u);
}

TEST(Files, MissingFileIsParseError) {
  EXPECT_THROW(io::load_count_matrix("/nonexistent/X.txt"), ParseError);
  EXPECT_THROW(io::load_model("/nonexistent/model"), ParseError);
}

TEST(Files, WriteFailureIsIoError) {
  EXPECT_THROW(io::write_text("/nonexistent/dir/file.txt", "x"), IoError);
}

TEST(ModelFiles, SaveLoadSaveIsByteIdentical) {
  GenConfig g;
  g.n_features = 8;
  g.n_columns = 6;
  g.n_conditions = 2;
  g.phenotype_support_size = 3;
  const PlantedInstance inst = generate(g, 3);
  const fs::path dir = scratch_dir("model");
  io::ModelFiles files{inst.planted_model(), io::default_names("f", 8), {"heart", "lung"},
                       io::default_names("p", 6), "0123456789abcdef"};
  io::save_model(dir / "a", files);
  const io::ModelFiles back = io::load_model(dir / "a");
  EXPECT_EQ(back.model.A, files.model.A);
  EXPECT_EQ(back.model.W, files.model.W);
  EXPECT_EQ(back.model.b, files.model.b);
  EXPECT_EQ(back.model.lambda, files.model.lambda);
  EXPECT_EQ(back.condition_names, files.condition_names);
  EXPECT_EQ(back.column_ids, files.column_ids);
  EXPECT_EQ(back.config_hash, files.config_hash);
  io::save_model(dir / "b", back);
  for (const char* name : {"A.tsv", "W.tsv", "b.tsv", "model.json"}) {
    EXPECT_EQ(io::read_text(dir / "a" / name), io::read_text(dir / "b" / name)) << name;
  }
  fs::remove_all(dir);
}

TEST(ModelFiles, InconsistentManifestIsRejected) {
  const fs::path dir = scratch_dir("badmodel");
  io::ModelFiles files{FactorModel{Matrix::Constant(2, 1, 0.5), Matrix::Ones(1, 3), Vector::Zero(2), 1.0, true},
                       io::default_names("f", 2), {"c1"}, io::default_names("p", 3), ""};
  io::save_model(dir, files);
  std::string manifest = io::read_text(dir / "model.json");
  manifest.replace(manifest.find("\"n_columns\": 3"), 14, "\"n_columns\": 4");
  io::write_text(dir / "model.json", manifest);
  EXPECT_THROW(io::load_model(dir), ParseError);
  io::write_text(dir / "model.json", "{\"format\": \"cnmf-model\"}");
  EXPECT_THROW(io::load_model(dir), ParseError);
  fs::remove_all(dir);
}

TEST(Config, DefaultsAndOverrides) {
  const RunConfig d = RunConfig::from_json_text("{}");
  EXPECT_EQ(d.solver.n_restarts, 5);
  EXPECT_EQ(d.solver.max_outer_iters, 500);
  EXPECT_EQ(d.eval.lambdas, (std::vector<double>{0.1, 0.4, 1.0}));
  const RunConfig c = RunConfig::from_json_text(
      R"({"seed": 9, "solver": {"lambda": 2.5, "simplex": false}, "gen": {"labels": null}, "eval": {"mode": "raw"}})");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.solver.lambda, 2.5);
  EXPECT_FALSE(c.solver.simplex_enabled);
  EXPECT_FALSE(c.gen.label_rule.has_value());
  EXPECT_EQ(c.solver_config().rng_seed, 9u);
}

TEST(Config, UnknownKeysAndTypesAreNamed) {
  auto message = [](const std::string& text) {
    try {
      RunConfig::from_json_text(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message(R"({"solver": {"lamda": 1}})").find("solver.lamda"), std::string::npos);
  EXPECT_NE(message(R"({"gen": {"labels": {"nois": 1}}})").find("gen.labels.nois"), std::string::npos);
  EXPECT_NE(message(R"({"bogus": 1})").find("bogus"), std::string::npos);
  EXPECT_NE(message(R"({"solver": {"restarts": "five"}})").find("solver.restarts"), std::string::npos);
  EXPECT_NE(message(R"({"solver": {"restarts": 1.5}})").find("solver.restarts"), std::string::npos);
  EXPECT_NE(message(R"({"solver": {"armijo_beta": 2}})").find("armijo_beta"), std::string::npos);
  EXPECT_NE(message(R"({"eval": {"mode": "both"}})").find("eval.mode"), std::string::npos);
  EXPECT_NE(message("{not json").find("JSON"), std::string::npos);
}

TEST(Config, HashIgnoresPathsButNotSettings) {
  const RunConfig a = RunConfig::from_json_text(R"({"paths": {"x": "a.txt"}})");
  const RunConfig b = RunConfig::from_json_text(R"({"paths": {"x": "b.txt"}})");
  const RunConfig c = RunConfig::from_json_text(R"({"seed": 1})");
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
  EXPECT_EQ(a.hash().size(), 16u);
  EXPECT_EQ(RunConfig::from_json_text(a.canonical_json()).canonical_json(), a.canonical_json());
}
