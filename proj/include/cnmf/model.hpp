#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cnmf {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Sparse non-negative d x N observation matrix (features x columns).
///
/// Entries are kept in coordinate form, sorted by (column, row), with a
/// column pointer array for per-column traversal. Explicit zeros are dropped
/// on construction, so every stored value is strictly positive.
class CountMatrix {
 public:
  struct Entry {
    Index row;
    Index col;
    double value;
  };

  CountMatrix() = default;

  /// Throws DimensionError on out-of-range or duplicate coordinates and
  /// std::invalid_argument on negative or non-finite values.
  CountMatrix(Index n_features, Index n_columns, std::vector<Entry> entries);

  static CountMatrix from_dense(const Matrix& dense);

  Index n_features() const noexcept { return n_features_; }
  Index n_columns() const noexcept { return n_columns_; }
  std::size_t nnz() const noexcept { return entries_.size(); }

  std::span<const Entry> entries() const noexcept { return entries_; }
  std::span<const Entry> column(Index j) const noexcept {
    return std::span<const Entry>(entries_).subspan(col_ptr_[j], col_ptr_[j + 1] - col_ptr_[j]);
  }

  Matrix to_dense() const;
  Vector row_means() const;

  /// Columns `cols` in the given order; names are carried over.
  CountMatrix select_columns(std::span<const Index> cols) const;

  const std::optional<std::vector<std::string>>& feature_names() const noexcept { return feature_names_; }
  const std::optional<std::vector<std::string>>& column_ids() const noexcept { return column_ids_; }
  void set_feature_names(std::vector<std::string> names);
  void set_column_ids(std::vector<std::string> ids);

 private:
  Index n_features_ = 0;
  Index n_columns_ = 0;
  std::vector<Entry> entries_;
  std::vector<std::size_t> col_ptr_{0};
  std::optional<std::vector<std::string>> feature_names_;
  std::optional<std::vector<std::string>> column_ids_;
};

/// Per-column sets of admissible condition indices (0-based, sorted, unique).
class SupportSets {
 public:
  SupportSets() = default;
  SupportSets(Index n_conditions, std::vector<std::vector<Index>> sets);

  /// Every column may load on every condition.
  static SupportSets full(Index n_columns, Index n_conditions);

  Index n_conditions() const noexcept { return n_conditions_; }
  Index n_columns() const noexcept { return static_cast<Index>(sets_.size()); }
  std::span<const Index> operator[](Index j) const noexcept { return sets_[static_cast<std::size_t>(j)]; }
  bool contains(Index j, Index k) const;

  SupportSets select_columns(std::span<const Index> cols) const;

  friend bool operator==(const SupportSets&, const SupportSets&) = default;

 private:
  Index n_conditions_ = 0;
  std::vector<std::vector<Index>> sets_;
};

/// Fitted factors: Y = A W + b 1^T.
struct FactorModel {
  Matrix A;  // d x K, columns on the scaled simplex when simplex_enabled
  Matrix W;  // K x N, entries in [0, 1]
  Vector b;  // d, non-negative
  double lambda = 1.0;
  bool simplex_enabled = true;

  Index n_features() const noexcept { return A.rows(); }
  Index n_conditions() const noexcept { return A.cols(); }
  Index n_columns() const noexcept { return W.cols(); }

  /// Throws DimensionError if A, W, b disagree.
  void check_shapes() const;
};

struct SolveReport {
  std::vector<double> objective_trace;
  int outer_iterations = 0;
  std::vector<double> restart_objectives;
  int selected_restart = 0;
  bool converged = false;
  double feasibility_max_violation = 0.0;
};

/// Maximum violation per constraint family. All fields are >= 0 and are all
/// exactly zero for a feasible model.
struct FeasibilityReport {
  double box_violation = 0.0;         // max distance of a W entry outside [0, 1]
  double support_leak = 0.0;          // max |w_kj| with k outside C_j
  double column_sum_deviation = 0.0;  // max |sum_i a_ik - lambda|; 0 when the simplex is off
  double a_negativity = 0.0;          // max(0, -min A)
  double b_negativity = 0.0;          // max(0, -min b)
  double min_a = 0.0;
  double min_b = 0.0;

  double max_violation() const noexcept;
};

Matrix reconstruct(const FactorModel& model);

FeasibilityReport check_feasibility(const FactorModel& model, const SupportSets* supports = nullptr);
inline FeasibilityReport check_feasibility(const FactorModel& model, const SupportSets& supports) {
  return check_feasibility(model, &supports);
}

}  // namespace cnmf
