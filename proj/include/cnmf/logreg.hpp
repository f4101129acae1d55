#pragma once

#include "cnmf/model.hpp"

#include <span>
#include <vector>

namespace cnmf {

enum class Penalty { l1, l2 };

struct LogRegOptions {
  double grad_tol = 1e-6;   // on the norm of the proximal gradient mapping
  int max_iters = 20000;
};

struct LogRegModel {
  Vector weights;
  double intercept = 0.0;
  double strength = 0.0;
  bool converged = false;
  int iterations = 0;

  Vector decision(const Matrix& features) const;
};

/// Penalized logistic regression
///   mean_i log(1 + exp(-s_i (x_i^T w + c))) + strength * R(w),
/// with R = ||w||_1 (l1) or ||w||^2 / 2 (l2) and an unpenalized intercept,
/// solved by accelerated proximal gradient (FISTA with restart). The l1
/// prox is soft-thresholding, so unused features get exactly zero weight.
/// Non-convergence is reported through `converged` with the last iterate.
LogRegModel fit_logreg(const Matrix& features, std::span<const int> labels, Penalty penalty, double strength,
                       const LogRegOptions& options = {});

/// Area under the ROC curve via ranks; tied scores count one half.
double auroc(std::span<const double> scores, std::span<const int> labels);

}  // namespace cnmf
