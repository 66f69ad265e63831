#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "creditprint/autodiff.hpp"
#include "creditprint/features.hpp"
#include "creditprint/mobility.hpp"
#include "creditprint/rng.hpp"

namespace creditprint {

// How a trajectory becomes a vector before the trajectory dense layer.
enum class TrajectoryEncoder {
  attention_gru,  // attention-gated GRU over the region sequence
  mean_region,    // mean of the trajectory's region representations
};

std::string to_string(TrajectoryEncoder e);
TrajectoryEncoder trajectory_encoder_from_string(const std::string& name);

struct TcanConfig {
  std::size_t hidden = 64;
  std::size_t trajectory_dim = 128;
  std::size_t head_hidden = 64;
  double gamma = 0.1;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 300;
  std::size_t patience = 20;
  double learning_rate = 1e-3;
  std::size_t max_pairs_per_user = 16;
  TrajectoryEncoder encoder = TrajectoryEncoder::attention_gru;
  std::uint64_t seed = 1;
};

// Row-vector convention: gate = σ(x·W + z·U + b).
struct GruParams {
  ad::Var w_update, w_reset, w_candidate;  // d×h
  ad::Var u_update, u_reset, u_candidate;  // h×h
  ad::Var b_update, b_reset, b_candidate;  // 1×h

  static GruParams create(std::size_t input_dim, std::size_t hidden, Rng& rng);
  std::vector<ad::Var> parameters() const;
  std::size_t input_dim() const { return w_update->value.rows(); }
  std::size_t hidden() const { return w_update->value.cols(); }
};

struct GruStep {
  ad::Var update, reset, candidate, state;
};

// One full GRU step on n stacked rows: x n×d, z_prev n×h. The state blends
// with the update gate.
GruStep gru_step(const GruParams& p, const ad::Var& x, const ad::Var& z_prev);

struct TcanModel {
  GruParams gru;
  ad::Var temporal_weight;    // d×1
  ad::Var trajectory_weight;  // h×dim (d×dim for the mean encoder)
  ad::Var trajectory_bias;    // 1×dim
  ad::Var user_weight;        // (dim + 9)×1
  ad::Var head_w1;            // (dim + manual)×head_hidden
  ad::Var head_b1;            // 1×head_hidden
  ad::Var head_w2;            // head_hidden×1
  ad::Var head_b2;            // 1×1
  double gamma = 0.1;
  TrajectoryEncoder encoder = TrajectoryEncoder::attention_gru;
  std::uint64_t seed = 1;

  static TcanModel create(std::size_t input_dim, std::size_t manual_dim, const TcanConfig& config);

  std::vector<ad::Var> parameters() const;
  std::size_t input_dim() const { return temporal_weight->value.rows(); }
  std::size_t trajectory_dim() const { return trajectory_bias->value.cols(); }
  std::size_t manual_dim() const { return head_w1->value.rows() - trajectory_dim(); }
};

// One user as the network sees it: region sequences, per-trajectory context,
// standardized manual features.
struct UserSample {
  UserId user = 0;
  int label = 0;
  std::vector<std::vector<RegionIndex>> trajectories;
  std::vector<std::array<double, kContextDim>> contexts;
  std::vector<double> manual;
};

UserSample make_user_sample(const UserRecord& user, std::vector<double> manual);

// softmax(X_traj · W_t) over positions; X_traj is m×d, m ≥ 1.
ad::Var temporal_attention(const ad::Var& temporal_weight, const ad::Var& trajectory_regions);

// Encodes trajectories (each a region sequence) into a T×dim matrix through
// the trajectory dense layer. `forced_attention`, when given, replaces the
// temporal attention with fixed per-position weights.
ad::Var encode_trajectories(const TcanModel& model, std::span<const std::vector<RegionIndex>> trajectories,
                            const Matrix& region_repr,
                            const std::vector<std::vector<double>>* forced_attention = nullptr);

// Single-trajectory convenience wrapper; returns 1×dim.
ad::Var trajectory_embed(const TcanModel& model, const std::vector<RegionIndex>& trajectory, const Matrix& region_repr,
                         const std::vector<double>* forced_attention = nullptr);

struct UserEmbedding {
  ad::Var embedding;  // 1×dim per user, stacked U×dim when batched
  ad::Var attention;  // one score per trajectory
};

// Attention pooling for consecutive user segments of `trajectory_embeddings`
// delimited by `offsets` (size users+1). Context rows enter the score only.
UserEmbedding user_aggregate(const TcanModel& model, const ad::Var& trajectory_embeddings,
                             const Matrix& contexts, std::span<const std::size_t> offsets,
                             const ad::Var& forced_scores = nullptr);

// σ(head([X_Tu | manual])), one row per user.
ad::Var predict_credit(const TcanModel& model, const ad::Var& user_embeddings, const Matrix& manual);

// Mean clamped cross-entropy.
ad::Var tcan_credit_loss(const ad::Var& predictions, std::span<const double> labels);

// Mean over users (users with one trajectory count as zero) of the mean over
// up to max_pairs sampled unordered trajectory pairs of -softplus(<X_i, X_j>).
ad::Var trajectory_similarity_loss(const ad::Var& trajectory_embeddings, std::span<const std::size_t> offsets,
                                   std::size_t max_pairs, Rng& rng);

struct TcanForward {
  ad::Var trajectories;  // T×dim
  ad::Var attention;     // T×1
  ad::Var users;         // U×dim
  ad::Var probabilities;  // U×1
  std::vector<std::size_t> offsets;
};

TcanForward tcan_forward(const TcanModel& model, std::span<const UserSample* const> users, const Matrix& region_repr);

struct TcanTrainResult {
  TcanModel model;
  std::vector<double> train_loss;
  std::vector<double> validation_auc;
  std::vector<double> validation_loss;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

// Mini-batch Adam on credit loss + gamma·similarity; early stopping on
// validation AUC (validation loss if validation has a single class), best
// parameters restored. Throws DivergenceError on a non-finite loss.
TcanTrainResult train_tcan(TcanModel model, const std::vector<UserSample>& train,
                           const std::vector<UserSample>& validation, const Matrix& region_repr,
                           const TcanConfig& config);

std::vector<double> tcan_predict(const TcanModel& model, const std::vector<UserSample>& users,
                                 const Matrix& region_repr);

// Mean cosine similarity over all intra-user trajectory-embedding pairs.
double mean_intra_user_cosine(const TcanModel& model, const std::vector<UserSample>& users,
                              const Matrix& region_repr);

std::string tcan_checkpoint_json(const TcanModel& model, const Standardizer& standardizer);
TcanModel tcan_from_checkpoint_json(const std::string& text, Standardizer* standardizer = nullptr);

// `user_id,probability,label`
std::string scores_csv(const std::vector<UserSample>& users, std::span<const double> probabilities);

}  // namespace creditprint
