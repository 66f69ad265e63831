#include "creditprint/baselines.hpp"

#include <cmath>
#include <limits>

#include "creditprint/errors.hpp"
#include "creditprint/optim.hpp"
#include "creditprint/rng.hpp"

namespace creditprint {
namespace {

void require_two_classes(std::span<const int> labels, std::size_t rows, const char* who) {
  if (labels.size() != rows) throw DimensionError(std::string(who) + ": one label per row required");
  std::size_t pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw DataError(std::string(who) + ": labels must be 0 or 1");
    pos += static_cast<std::size_t>(y);
  }
  if (pos == 0 || pos == labels.size()) throw DataError(std::string(who) + ": both classes must be present");
}

std::vector<double> as_double(std::span<const int> labels) { return {labels.begin(), labels.end()}; }

}  // namespace

ad::Var logistic_objective(const ad::Var& weights, const ad::Var& intercept, const Matrix& features,
                           std::span<const int> labels, double l2) {
  const auto logits = ad::add_row_broadcast(ad::matmul(ad::constant(features), weights), intercept);
  // -[y log σ(z) + (1-y) log(1-σ(z))] = softplus(z) - y z
  const double n = static_cast<double>(labels.size());
  Matrix neg_y(labels.size(), 1);
  for (std::size_t i = 0; i < labels.size(); ++i) neg_y[i] = -labels[i] / n;
  const auto data = ad::add(ad::scale(ad::sum(ad::softplus(logits)), 1.0 / n), ad::weighted_sum(logits, neg_y));
  if (l2 == 0.0) return data;
  return ad::add(data, ad::scale(ad::inner_product(weights, weights), 0.5 * l2));
}

std::vector<double> LogisticModel::predict(const Matrix& features) const {
  const Matrix z = matmul(features, weights);
  std::vector<double> p(z.rows());
  for (std::size_t i = 0; i < z.rows(); ++i) p[i] = 1.0 / (1.0 + std::exp(-(z[i] + intercept)));
  return p;
}

LogisticModel fit_logistic(const Matrix& features, std::span<const int> labels, const LogisticConfig& config) {
  require_two_classes(labels, features.rows(), "fit_logistic");
  auto w = ad::parameter(Matrix(features.cols(), 1));
  auto b = ad::parameter(Matrix(1, 1));
  LogisticModel m;
  for (m.iterations = 0; m.iterations < config.max_iterations; ++m.iterations) {
    w->zero_grad();
    b->zero_grad();
    const auto loss = logistic_objective(w, b, features, labels, config.l2);
    if (!std::isfinite(loss->value[0])) throw DivergenceError("logistic regression loss became non-finite");
    ad::backward(loss);
    double norm2 = b->grad[0] * b->grad[0];
    for (double g : w->grad.values()) norm2 += g * g;
    m.gradient_norm = std::sqrt(norm2);
    if (m.gradient_norm < config.gradient_tolerance) break;
    for (std::size_t i = 0; i < w->value.size(); ++i) w->value[i] -= config.learning_rate * w->grad[i];
    b->value[0] -= config.learning_rate * b->grad[0];
  }
  m.weights = w->value;
  m.intercept = b->value[0];
  return m;
}

MlpModel MlpModel::create(std::size_t input_dim, const MlpConfig& config) {
  Rng rng(config.seed);
  MlpModel m;
  m.w1 = ad::parameter(glorot_uniform(input_dim, config.hidden, rng));
  m.b1 = ad::parameter(Matrix(1, config.hidden));
  m.w2 = ad::parameter(Matrix(config.hidden, 1));
  m.b2 = ad::parameter(Matrix(1, 1));
  return m;
}

ad::Var MlpModel::forward(const Matrix& features) const {
  const auto hidden = ad::relu(ad::add_row_broadcast(ad::matmul(ad::constant(features), w1), b1));
  return ad::sigmoid(ad::add_row_broadcast(ad::matmul(hidden, w2), b2));
}

std::vector<double> MlpModel::predict(const Matrix& features) const { return forward(features)->value.values(); }

MlpModel fit_manual_nn(const Matrix& features, std::span<const int> labels, const Matrix& val_features,
                       std::span<const int> val_labels, const MlpConfig& config) {
  require_two_classes(labels, features.rows(), "fit_manual_nn");
  if (val_labels.size() != val_features.rows()) throw DimensionError("fit_manual_nn: one validation label per row required");
  MlpModel m = MlpModel::create(features.cols(), config);
  const auto params = m.parameters();
  Adam adam(params, AdamConfig{config.learning_rate});
  const auto y = as_double(labels);
  const auto val_y = as_double(val_labels);
  double best = std::numeric_limits<double>::infinity();
  auto best_params = snapshot(params);
  std::size_t since_best = 0;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    if (!val_y.empty()) {
      const double val = ad::binary_cross_entropy(ad::constant(m.forward(val_features)->value), val_y)->value[0];
      if (val < best) {
        best = val;
        best_params = snapshot(params);
        m.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= config.patience) {
        break;
      }
    }
    const auto loss = ad::binary_cross_entropy(m.forward(features), y);
    if (!std::isfinite(loss->value[0])) throw DivergenceError("manual NN loss became non-finite");
    adam.zero_grad();
    ad::backward(loss);
    adam.step();
  }
  if (!val_y.empty()) restore(params, best_params);
  adam.zero_grad();
  return m;
}

Matrix region_score_representation(const RegionCreditTable& table) {
  return Matrix(table.score.size(), 1, table.score);
}

std::vector<std::vector<double>> variant_without_ren_features(const UserRecord& user, const RegionCreditTable& table) {
  std::vector<std::vector<double>> out;
  for (const auto& t : user.trajectories) {
    std::vector<double> seq;
    for (const auto& v : t.visits) {
      if (v.region >= table.score.size()) throw DataError("region " + std::to_string(v.region) + " outside the score table");
      seq.push_back(table.score[v.region]);
    }
    out.push_back(std::move(seq));
  }
  return out;
}

Matrix variant_without_ten(const UserRecord& user, const Matrix& embeddings) {
  Matrix out(user.trajectories.size(), embeddings.cols());
  for (std::size_t t = 0; t < user.trajectories.size(); ++t) {
    const auto& visits = user.trajectories[t].visits;
    if (visits.empty()) throw DataError("trajectory without visits");
    auto row = out.row(t);
    for (const auto& v : visits) {
      if (v.region >= embeddings.rows()) throw DataError("region " + std::to_string(v.region) + " has no embedding");
      auto src = embeddings.row(v.region);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += src[c];
    }
    for (double& x : row) x /= static_cast<double>(visits.size());
  }
  return out;
}

}  // namespace creditprint
