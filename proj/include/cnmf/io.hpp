#pragma once

#include "cnmf/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace cnmf::io {

namespace fs = std::filesystem;

/// printf "%.17g": 17 significant digits, enough for doubles to round-trip exactly.
std::string format_double(double v);

// Count matrix: header "%%cnmf-matrix d N nnz", then nnz lines "row col value"
// with 1-based indices. Other lines starting with '%' are comments.
void write_count_matrix(std::ostream& os, const CountMatrix& X);
CountMatrix read_count_matrix(std::istream& is, const std::string& source = "<stream>");

// Supports: header "%%cnmf-supports N K", then N lines of 1-based condition
// indices separated by spaces; a blank line is an empty set.
void write_supports(std::ostream& os, const SupportSets& supports);
SupportSets read_supports(std::istream& is, const std::string& source = "<stream>");

// Labels: header "%%cnmf-labels N", then N lines holding 0 or 1.
void write_labels(std::ostream& os, const std::vector<int>& labels);
std::vector<int> read_labels(std::istream& is, const std::string& source = "<stream>");

// One name per line.
void write_names(std::ostream& os, const std::vector<std::string>& names);
std::vector<std::string> read_names(std::istream& is, const std::string& source = "<stream>");

/// Tab-separated dense table: a header row "<corner> col names...", then one
/// row per matrix row starting with its name.
struct Table {
  std::string corner;
  std::vector<std::string> column_names;
  std::vector<std::string> row_names;
  Matrix values;
};
void write_table(std::ostream& os, const Table& table);
Table read_table(std::istream& is, const std::string& source = "<stream>");

CountMatrix load_count_matrix(const fs::path& path);
void save_count_matrix(const fs::path& path, const CountMatrix& X);
SupportSets load_supports(const fs::path& path);
void save_supports(const fs::path& path, const SupportSets& supports);
std::vector<int> load_labels(const fs::path& path);
void save_labels(const fs::path& path, const std::vector<int>& labels);
std::vector<std::string> load_names(const fs::path& path);
void save_names(const fs::path& path, const std::vector<std::string>& names);
Table load_table(const fs::path& path);
void save_table(const fs::path& path, const Table& table);

/// Missing or unreadable inputs raise ParseError; failed writes raise IoError.
std::string read_text(const fs::path& path);
/// Writes to a sibling temporary file and renames it into place.
void write_text(const fs::path& path, const std::string& text);

std::vector<std::string> default_names(const std::string& prefix, Index n);

/// A model directory: A.tsv, W.tsv, b.tsv and model.json (lambda, flags,
/// shapes, provenance).
struct ModelFiles {
  FactorModel model;
  std::vector<std::string> feature_names;
  std::vector<std::string> condition_names;
  std::vector<std::string> column_ids;
  std::string config_hash;
};
void save_model(const fs::path& dir, const ModelFiles& files);
ModelFiles load_model(const fs::path& dir);

}  // namespace cnmf::io
