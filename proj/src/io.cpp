#include "cnmf/io.hpp"

#include "cnmf/error.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace cnmf::io {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, '\t')) out.push_back(cell);
  if (!line.empty() && line.back() == '\t') out.emplace_back();
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
  return out;
}

template <typename T>
T parse_number(std::string_view tok, const std::string& source, std::size_t line, const char* what) {
  T value{};
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError(source, line, std::string("cannot parse ") + what + " '" + std::string(tok) + "'");
  }
  return value;
}

// Reads the header line and checks its magic token.
std::vector<std::string_view> read_header(std::istream& is, std::string& buffer, const std::string& source,
                                          const char* magic, std::size_t n_fields) {
  if (!std::getline(is, buffer)) throw ParseError(source, 1, std::string("missing header '") + magic + "'");
  auto tokens = split_ws(buffer);
  if (tokens.empty() || tokens[0] != magic) {
    throw ParseError(source, 1, std::string("expected header '") + magic + "'");
  }
  if (tokens.size() != n_fields + 1) {
    throw ParseError(source, 1, "header needs " + std::to_string(n_fields) + " fields");
  }
  return tokens;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  return in;
}

template <typename Writer>
void save_with(const fs::path& path, Writer&& writer) {
  std::ostringstream os;
  writer(os);
  write_text(path, os.str());
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_count_matrix(std::ostream& os, const CountMatrix& X) {
  os << "%%cnmf-matrix " << X.n_features() << ' ' << X.n_columns() << ' ' << X.nnz() << '\n';
  for (const auto& e : X.entries()) os << e.row + 1 << ' ' << e.col + 1 << ' ' << format_double(e.value) << '\n';
}

CountMatrix read_count_matrix(std::istream& is, const std::string& source) {
  std::string line;
  const auto header = read_header(is, line, source, "%%cnmf-matrix", 3);
  const auto d = parse_number<Index>(header[1], source, 1, "feature count");
  const auto n = parse_number<Index>(header[2], source, 1, "column count");
  const auto nnz = parse_number<long long>(header[3], source, 1, "entry count");
  if (d < 0 || n < 0 || nnz < 0) throw ParseError(source, 1, "negative size in header");

  std::vector<CountMatrix::Entry> entries;
  entries.reserve(static_cast<std::size_t>(nnz));
  std::unordered_map<long long, std::size_t> seen;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0].front() == '%') continue;
    if (tok.size() != 3) throw ParseError(source, line_no, "expected 'row col value'");
    const auto r = parse_number<Index>(tok[0], source, line_no, "row index");
    const auto c = parse_number<Index>(tok[1], source, line_no, "column index");
    const auto v = parse_number<double>(tok[2], source, line_no, "value");
    if (r < 1 || r > d) throw ParseError(source, line_no, "row index " + std::to_string(r) + " outside [1, " + std::to_string(d) + "]");
    if (c < 1 || c > n) throw ParseError(source, line_no, "column index " + std::to_string(c) + " outside [1, " + std::to_string(n) + "]");
    if (!(v >= 0.0) || !std::isfinite(v)) throw ParseError(source, line_no, "value must be finite and non-negative");
    if (static_cast<long long>(entries.size()) == nnz) throw ParseError(source, line_no, "more entries than the header declares");
    const auto [it, fresh] = seen.emplace((c - 1) * static_cast<long long>(d) + (r - 1), line_no);
    if (!fresh) throw ParseError(source, line_no, "duplicate coordinate, first given on line " + std::to_string(it->second));
    entries.push_back({r - 1, c - 1, v});
  }
  if (static_cast<long long>(entries.size()) != nnz) {
    throw ParseError(source, line_no, "header declares " + std::to_string(nnz) + " entries, found " + std::to_string(entries.size()));
  }
  try {
    return CountMatrix(d, n, std::move(entries));
  } catch (const std::exception& e) {
    throw ParseError(source, 0, e.what());
  }
}

void write_supports(std::ostream& os, const SupportSets& supports) {
  os << "%%cnmf-supports " << supports.n_columns() << ' ' << supports.n_conditions() << '\n';
  for (Index j = 0; j < supports.n_columns(); ++j) {
    bool first = true;
    for (Index k : supports[j]) {
      if (!first) os << ' ';
      os << k + 1;
      first = false;
    }
    os << '\n';
  }
}

SupportSets read_supports(std::istream& is, const std::string& source) {
  std::string line;
  const auto header = read_header(is, line, source, "%%cnmf-supports", 2);
  const auto n = parse_number<Index>(header[1], source, 1, "column count");
  const auto K = parse_number<Index>(header[2], source, 1, "condition count");
  if (n < 0 || K < 0) throw ParseError(source, 1, "negative size in header");

  std::vector<std::vector<Index>> sets;
  sets.reserve(static_cast<std::size_t>(n));
  std::size_t line_no = 1;
  while (static_cast<Index>(sets.size()) < n && std::getline(is, line)) {
    ++line_no;
    std::vector<Index> set;
    for (auto tok : split_ws(line)) {
      const auto k = parse_number<Index>(tok, source, line_no, "condition index");
      if (k < 1 || k > K) {
        throw ParseError(source, line_no, "condition index " + std::to_string(k) + " outside [1, " + std::to_string(K) + "]");
      }
      set.push_back(k - 1);
    }
    sets.push_back(std::move(set));
  }
  if (static_cast<Index>(sets.size()) != n) {
    throw ParseError(source, line_no, "expected " + std::to_string(n) + " support lines, found " + std::to_string(sets.size()));
  }
  while (std::getline(is, line)) {
    ++line_no;
    if (!split_ws(line).empty()) throw ParseError(source, line_no, "unexpected content after the last support line");
  }
  return SupportSets(K, std::move(sets));
}

void write_labels(std::ostream& os, const std::vector<int>& labels) {
  os << "%%cnmf-labels " << labels.size() << '\n';
  for (int y : labels) os << y << '\n';
}

std::vector<int> read_labels(std::istream& is, const std::string& source) {
  std::string line;
  const auto header = read_header(is, line, source, "%%cnmf-labels", 1);
  const auto n = parse_number<long long>(header[1], source, 1, "label count");
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 1) throw ParseError(source, line_no, "expected a single label");
    const int y = parse_number<int>(tok[0], source, line_no, "label");
    if (y != 0 && y != 1) throw ParseError(source, line_no, "label must be 0 or 1");
    labels.push_back(y);
  }
  if (static_cast<long long>(labels.size()) != n) {
    throw ParseError(source, line_no, "header declares " + std::to_string(n) + " labels, found " + std::to_string(labels.size()));
  }
  return labels;
}

void write_names(std::ostream& os, const std::vector<std::string>& names) {
  for (const auto& n : names) os << n << '\n';
}

std::vector<std::string> read_names(std::istream& is, const std::string& source) {
  std::vector<std::string> names;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) throw ParseError(source, line_no, "empty name");
    names.push_back(line);
  }
  return names;
}

void write_table(std::ostream& os, const Table& t) {
  os << t.corner;
  for (const auto& c : t.column_names) os << '\t' << c;
  os << '\n';
  for (Index r = 0; r < t.values.rows(); ++r) {
    os << t.row_names[static_cast<std::size_t>(r)];
    for (Index c = 0; c < t.values.cols(); ++c) os << '\t' << format_double(t.values(r, c));
    os << '\n';
  }
}

Table read_table(std::istream& is, const std::string& source) {
  Table t;
  std::string line;
  if (!std::getline(is, line)) throw ParseError(source, 1, "missing header row");
  auto header = split_tabs(line);
  if (header.empty()) throw ParseError(source, 1, "empty header row");
  t.corner = header[0];
  t.column_names.assign(header.begin() + 1, header.end());
  const std::size_t width = t.column_names.size();

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = split_tabs(line);
    if (cells.size() != width + 1) {
      throw ParseError(source, line_no, "expected " + std::to_string(width + 1) + " cells, found " + std::to_string(cells.size()));
    }
    t.row_names.push_back(cells[0]);
    std::vector<double> row;
    for (std::size_t c = 1; c < cells.size(); ++c) row.push_back(parse_number<double>(cells[c], source, line_no, "value"));
    rows.push_back(std::move(row));
  }
  t.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < width; ++c) t.values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  }
  return t;
}

std::string read_text(const fs::path& path) {
  auto in = open_input(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out.flush()) throw IoError("cannot write " + path.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot write " + path.string());
  }
}

CountMatrix load_count_matrix(const fs::path& path) {
  auto in = open_input(path);
  return read_count_matrix(in, path.string());
}
void save_count_matrix(const fs::path& path, const CountMatrix& X) {
  save_with(path, [&](std::ostream& os) { write_count_matrix(os, X); });
}
SupportSets load_supports(const fs::path& path) {
  auto in = open_input(path);
  return read_supports(in, path.string());
}
void save_supports(const fs::path& path, const SupportSets& supports) {
  save_with(path, [&](std::ostream& os) { write_supports(os, supports); });
}
std::vector<int> load_labels(const fs::path& path) {
  auto in = open_input(path);
  return read_labels(in, path.string());
}
void save_labels(const fs::path& path, const std::vector<int>& labels) {
  save_with(path, [&](std::ostream& os) { write_labels(os, labels); });
}
std::vector<std::string> load_names(const fs::path& path) {
  auto in = open_input(path);
  return read_names(in, path.string());
}
void save_names(const fs::path& path, const std::vector<std::string>& names) {
  save_with(path, [&](std::ostream& os) { write_names(os, names); });
}
Table load_table(const fs::path& path) {
  auto in = open_input(path);
  return read_table(in, path.string());
}
void save_table(const fs::path& path, const Table& table) {
  save_with(path, [&](std::ostream& os) { write_table(os, table); });
}

std::vector<std::string> default_names(const std::string& prefix, Index n) {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Index i = 1; i <= n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

void save_model(const fs::path& dir, const ModelFiles& files) {
  const FactorModel& m = files.model;
  m.check_shapes();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create model directory " + dir.string());

  save_table(dir / "A.tsv", {"feature", files.condition_names, files.feature_names, m.A});
  save_table(dir / "W.tsv", {"column", files.condition_names, files.column_ids, m.W.transpose()});
  save_table(dir / "b.tsv", {"feature", {"bias"}, files.feature_names, m.b});

  nlohmann::ordered_json manifest;
  manifest["format"] = "cnmf-model";
  manifest["lambda"] = m.lambda;
  manifest["simplex_enabled"] = m.simplex_enabled;
  manifest["n_features"] = m.A.rows();
  manifest["n_conditions"] = m.A.cols();
  manifest["n_columns"] = m.W.cols();
  manifest["config_hash"] = files.config_hash;
  write_text(dir / "model.json", manifest.dump(2) + "\n");
}

ModelFiles load_model(const fs::path& dir) {
  const std::string manifest_path = (dir / "model.json").string();
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text(dir / "model.json"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path, 0, e.what());
  }
  ModelFiles files;
  Index d = 0, K = 0, N = 0;
  try {
    if (manifest.at("format") != "cnmf-model") throw ParseError(manifest_path, 0, "not a model manifest");
    files.model.lambda = manifest.at("lambda").get<double>();
    files.model.simplex_enabled = manifest.at("simplex_enabled").get<bool>();
    files.config_hash = manifest.at("config_hash").get<std::string>();
    d = manifest.at("n_features").get<Index>();
    K = manifest.at("n_conditions").get<Index>();
    N = manifest.at("n_columns").get<Index>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path, 0, e.what());
  }

  Table a = load_table(dir / "A.tsv");
  Table w = load_table(dir / "W.tsv");
  Table b = load_table(dir / "b.tsv");
  if (a.values.rows() != d || a.values.cols() != K) throw ParseError((dir / "A.tsv").string(), 0, "shape disagrees with model.json");
  if (w.values.rows() != N || w.values.cols() != K) throw ParseError((dir / "W.tsv").string(), 0, "shape disagrees with model.json");
  if (b.values.rows() != d || b.values.cols() != 1) throw ParseError((dir / "b.tsv").string(), 0, "shape disagrees with model.json");
  files.model.A = std::move(a.values);
  files.model.W = w.values.transpose();
  files.model.b = b.values.col(0);
  files.feature_names = std::move(a.row_names);
  files.condition_names = std::move(a.column_names);
  files.column_ids = std::move(w.row_names);
  return files;
}

}  // namespace cnmf::io
