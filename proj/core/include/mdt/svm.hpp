#pragma once

#include <cstdint>
#include <vector>

#include "mdt/matrix.hpp"

namespace mdt {

struct LinearSvm {
  std::vector<double> w;
  double b = 0.0;
  std::uint64_t n_samples = 0;
  double positive_fraction = 0.0;

  double decision(const double* x) const;
  // sign(0) counts as reliable
  bool predict(const double* x) const { return decision(x) >= 0.0; }
};

struct SvmTrainConfig {
  double lambda = 7e-3;  // L2 strength on w (bias unregularized)
  int epochs = 12;
  double eta0 = 1.0;  // eta_t = scale * eta0 / (1 + lambda * eta0 * t)
  std::uint64_t seed = 0;
  int min_samples_per_model = 20;
};

struct SvmTrainResult {
  LinearSvm model;
  double final_objective = 0.0;
  // objective at each epoch boundary; nonincreasing because an epoch that
  // worsens the objective is rolled back and retried with a halved step
  std::vector<double> objective_trace;
};

// lambda/2 * ||w||^2 + (1/N) * sum max(0, 1 - y_i (w.x_i + b))
double svm_objective(const std::vector<double>& w, double b, const Matrix& X,
                     const std::vector<std::uint8_t>& labels, double lambda);

// Deterministic epoch-shuffled subgradient descent on the hinge objective.
// labels: 1 = positive (reliable), 0 = negative. Throws
// std::invalid_argument when only one class is present (callers substitute a
// constant predictor).
SvmTrainResult train_svm(const Matrix& X, const std::vector<std::uint8_t>& labels,
                         const SvmTrainConfig& cfg);

}  // namespace mdt
