#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "creditprint/autodiff.hpp"
#include "creditprint/matrix.hpp"
#include "creditprint/mobility.hpp"
#include "creditprint/region_graphs.hpp"

namespace creditprint {

struct LogisticConfig {
  double l2 = 1e-2;
  double learning_rate = 0.5;
  std::size_t max_iterations = 20000;
  double gradient_tolerance = 1e-6;
};

struct LogisticModel {
  Matrix weights;  // d×1
  double intercept = 0.0;
  std::size_t iterations = 0;
  double gradient_norm = 0.0;

  std::vector<double> predict(const Matrix& features) const;
};

// Mean logistic loss + (l2 / 2)·|w|², intercept unpenalized.
ad::Var logistic_objective(const ad::Var& weights, const ad::Var& intercept, const Matrix& features,
                           std::span<const int> labels, double l2);

// Full-batch gradient descent; stops once the gradient norm drops below the
// tolerance. Throws DataError on single-class labels.
LogisticModel fit_logistic(const Matrix& features, std::span<const int> labels, const LogisticConfig& config = {});

struct MlpConfig {
  std::size_t hidden = 16;
  double learning_rate = 1e-2;
  std::size_t max_epochs = 2000;
  std::size_t patience = 50;
  std::uint64_t seed = 1;
};

struct MlpModel {
  ad::Var w1, b1, w2, b2;  // d×hidden, 1×hidden, hidden×1, 1×1
  std::size_t best_epoch = 0;

  static MlpModel create(std::size_t input_dim, const MlpConfig& config);
  std::vector<ad::Var> parameters() const { return {w1, b1, w2, b2}; }
  ad::Var forward(const Matrix& features) const;  // n×1 probabilities
  std::vector<double> predict(const Matrix& features) const;
};

// Full-batch Adam on mean cross-entropy, early stopping on validation loss
// when validation rows are given.
MlpModel fit_manual_nn(const Matrix& features, std::span<const int> labels, const Matrix& val_features,
                       std::span<const int> val_labels, const MlpConfig& config = {});

// b×1 matrix of region scores: the region representation that stands in for
// learned embeddings when the embedding network is ablated.
Matrix region_score_representation(const RegionCreditTable& table);

// Per trajectory, the score of each visited region in order.
std::vector<std::vector<double>> variant_without_ren_features(const UserRecord& user, const RegionCreditTable& table);

// Per trajectory (rows), the mean of its regions' embeddings.
Matrix variant_without_ten(const UserRecord& user, const Matrix& embeddings);

}  // namespace creditprint
