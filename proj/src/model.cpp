#include "cnmf/model.hpp"

#include "cnmf/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cnmf {

CountMatrix::CountMatrix(Index n_features, Index n_columns, std::vector<Entry> entries)
    : n_features_(n_features), n_columns_(n_columns) {
  if (n_features < 0 || n_columns < 0) {
    throw DimensionError("negative matrix dimensions");
  }
  for (const auto& e : entries) {
    if (e.row < 0 || e.row >= n_features || e.col < 0 || e.col >= n_columns) {
      throw DimensionError("coordinate (" + std::to_string(e.row) + ", " + std::to_string(e.col) +
                           ") outside " + std::to_string(n_features) + " x " + std::to_string(n_columns));
    }
    if (!std::isfinite(e.value) || e.value < 0.0) {
      throw std::invalid_argument("entry (" + std::to_string(e.row) + ", " + std::to_string(e.col) +
                                  ") is negative or not finite");
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.col != b.col ? a.col < b.col : a.row < b.row;
  });
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].row == entries[i - 1].row && entries[i].col == entries[i - 1].col) {
      throw DimensionError("duplicate coordinate (" + std::to_string(entries[i].row) + ", " +
                           std::to_string(entries[i].col) + ")");
    }
  }
  std::erase_if(entries, [](const Entry& e) { return e.value == 0.0; });
  entries_ = std::move(entries);

  col_ptr_.assign(static_cast<std::size_t>(n_columns) + 1, 0);
  for (const auto& e : entries_) ++col_ptr_[static_cast<std::size_t>(e.col) + 1];
  for (std::size_t j = 0; j < static_cast<std::size_t>(n_columns); ++j) col_ptr_[j + 1] += col_ptr_[j];
}

CountMatrix CountMatrix::from_dense(const Matrix& dense) {
  std::vector<Entry> entries;
  for (Index j = 0; j < dense.cols(); ++j) {
    for (Index i = 0; i < dense.rows(); ++i) {
      if (dense(i, j) != 0.0) entries.push_back({i, j, dense(i, j)});
    }
  }
  return CountMatrix(dense.rows(), dense.cols(), std::move(entries));
}

Matrix CountMatrix::to_dense() const {
  Matrix out = Matrix::Zero(n_features_, n_columns_);
  for (const auto& e : entries_) out(e.row, e.col) = e.value;
  return out;
}

Vector CountMatrix::row_means() const {
  Vector means = Vector::Zero(n_features_);
  if (n_columns_ == 0) return means;
  for (const auto& e : entries_) means(e.row) += e.value;
  return means / static_cast<double>(n_columns_);
}

CountMatrix CountMatrix::select_columns(std::span<const Index> cols) const {
  std::vector<Entry> out;
  for (std::size_t jj = 0; jj < cols.size(); ++jj) {
    if (cols[jj] < 0 || cols[jj] >= n_columns_) throw DimensionError("column index out of range");
    for (const auto& e : column(cols[jj])) out.push_back({e.row, static_cast<Index>(jj), e.value});
  }
  CountMatrix sub(n_features_, static_cast<Index>(cols.size()), std::move(out));
  sub.feature_names_ = feature_names_;
  if (column_ids_) {
    std::vector<std::string> ids;
    for (Index c : cols) ids.push_back((*column_ids_)[static_cast<std::size_t>(c)]);
    sub.column_ids_ = std::move(ids);
  }
  return sub;
}

void CountMatrix::set_feature_names(std::vector<std::string> names) {
  if (static_cast<Index>(names.size()) != n_features_) {
    throw DimensionError("expected " + std::to_string(n_features_) + " feature names, got " +
                         std::to_string(names.size()));
  }
  feature_names_ = std::move(names);
}

void CountMatrix::set_column_ids(std::vector<std::string> ids) {
  if (static_cast<Index>(ids.size()) != n_columns_) {
    throw DimensionError("expected " + std::to_string(n_columns_) + " column ids, got " + std::to_string(ids.size()));
  }
  column_ids_ = std::move(ids);
}

SupportSets::SupportSets(Index n_conditions, std::vector<std::vector<Index>> sets)
    : n_conditions_(n_conditions), sets_(std::move(sets)) {
  if (n_conditions < 0) throw DimensionError("negative condition count");
  for (std::size_t j = 0; j < sets_.size(); ++j) {
    auto& s = sets_[j];
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    if (!s.empty() && (s.front() < 0 || s.back() >= n_conditions)) {
      throw DimensionError("support of column " + std::to_string(j) + " has a condition index outside [0, " +
                           std::to_string(n_conditions) + ")");
    }
  }
}

SupportSets SupportSets::full(Index n_columns, Index n_conditions) {
  std::vector<Index> all(static_cast<std::size_t>(n_conditions));
  for (Index k = 0; k < n_conditions; ++k) all[static_cast<std::size_t>(k)] = k;
  return SupportSets(n_conditions, std::vector<std::vector<Index>>(static_cast<std::size_t>(n_columns), all));
}

bool SupportSets::contains(Index j, Index k) const {
  const auto& s = sets_[static_cast<std::size_t>(j)];
  return std::binary_search(s.begin(), s.end(), k);
}

SupportSets SupportSets::select_columns(std::span<const Index> cols) const {
  std::vector<std::vector<Index>> out;
  out.reserve(cols.size());
  for (Index c : cols) {
    if (c < 0 || c >= n_columns()) throw DimensionError("column index out of range");
    out.push_back(sets_[static_cast<std::size_t>(c)]);
  }
  return SupportSets(n_conditions_, std::move(out));
}

void FactorModel::check_shapes() const {
  if (W.rows() != A.cols()) {
    throw DimensionError("A has " + std::to_string(A.cols()) + " columns but W has " + std::to_string(W.rows()) +
                         " rows");
  }
  if (b.size() != A.rows()) {
    throw DimensionError("A has " + std::to_string(A.rows()) + " rows but b has length " + std::to_string(b.size()));
  }
}

double FeasibilityReport::max_violation() const noexcept {
  return std::max({box_violation, support_leak, column_sum_deviation, a_negativity, b_negativity});
}

Matrix reconstruct(const FactorModel& model) {
  model.check_shapes();
  Matrix y = model.A * model.W;
  y.colwise() += model.b;
  return y;
}

FeasibilityReport check_feasibility(const FactorModel& model, const SupportSets* supports) {
  model.check_shapes();
  FeasibilityReport r;
  const Matrix& W = model.W;
  if (supports && (supports->n_columns() != W.cols() || supports->n_conditions() != W.rows())) {
    throw DimensionError("support sets are " + std::to_string(supports->n_columns()) + " columns over " +
                         std::to_string(supports->n_conditions()) + " conditions, W is " +
                         std::to_string(W.rows()) + " x " + std::to_string(W.cols()));
  }
  for (Index j = 0; j < W.cols(); ++j) {
    for (Index k = 0; k < W.rows(); ++k) {
      const double w = W(k, j);
      r.box_violation = std::max({r.box_violation, -w, w - 1.0});
      if (supports && w != 0.0 && !supports->contains(j, k)) r.support_leak = std::max(r.support_leak, std::abs(w));
    }
  }
  if (model.simplex_enabled) {
    for (Index k = 0; k < model.A.cols(); ++k) {
      r.column_sum_deviation = std::max(r.column_sum_deviation, std::abs(model.A.col(k).sum() - model.lambda));
    }
  }
  r.min_a = model.A.size() ? model.A.minCoeff() : 0.0;
  r.min_b = model.b.size() ? model.b.minCoeff() : 0.0;
  r.a_negativity = std::max(0.0, -r.min_a);
  r.b_negativity = std::max(0.0, -r.min_b);
  return r;
}

}  // namespace cnmf
