#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "creditprint/autodiff.hpp"
#include "creditprint/region_graphs.hpp"
#include "creditprint/rng.hpp"

namespace creditprint {

enum class SimilarityLoss {
  // log s̃(<r, r_s>) + (1 - log s̃(<r, r_d>)) with s̃(x) = 1 / (1 + e^x), taken literally.
  verbatim,
  // softplus(-<r, r_s>) + softplus(<r, r_d>): the usual negative-sampling form.
  logistic,
};

std::string to_string(SimilarityLoss s);
SimilarityLoss similarity_loss_from_string(const std::string& name);

struct RenConfig {
  std::size_t embedding_dim = 32;
  double gamma = 0.1;
  double delta = -1.0;  // negative: half the interquartile range of visited scores
  std::size_t pairs_per_anchor = 5;
  std::size_t max_epochs = 500;
  std::size_t patience = 20;
  double learning_rate = 1e-3;
  double holdout_fraction = 0.2;
  SimilarityLoss similarity_loss = SimilarityLoss::verbatim;
  std::uint64_t seed = 1;
};

// Graph attention logits, two convolution weights and the region classifier.
struct RenModel {
  std::vector<GraphKind> graph_kinds;
  ad::Var graph_logits;  // 1×M
  ad::Var layer0;        // d_in×dim
  ad::Var layer1;        // dim×dim
  ad::Var classifier;    // dim×1
  double gamma = 0.1;
  double delta = 0.0;
  SimilarityLoss similarity_loss = SimilarityLoss::verbatim;
  std::uint64_t seed = 1;

  static RenModel create(std::size_t input_dim, const std::vector<GraphKind>& kinds, const RenConfig& config);

  std::vector<ad::Var> parameters() const { return {graph_logits, layer0, layer1, classifier}; }
  std::size_t embedding_dim() const { return layer1->value.cols(); }
  // softmax of the graph logits.
  std::vector<double> attention() const;
};

// One row per region: score, rescaled log visitor count, hourly dynamic vector.
inline constexpr std::size_t kRegionFeatureDim = 2 + kSlotsPerDay;
Matrix region_input_features(const RegionCreditTable& table);

// Σ_g softmax(W_g)_g · Ã_g.
ad::Var merge_graphs(const RenModel& model, std::span<const Matrix> normalized);
// Two sigmoid graph-convolution layers; returns b×dim embeddings.
ad::Var ren_forward(const RenModel& model, const ad::Var& merged, const Matrix& features);

// Mean cross-entropy of sigmoid(X_r·θ) against region labels over `regions`.
ad::Var ren_classification_loss(const ad::Var& embeddings, const ad::Var& classifier, std::span<const int> labels,
                                std::span<const RegionIndex> regions);

struct PairSample {
  RegionIndex anchor = 0;
  std::vector<RegionIndex> similar;
  std::vector<RegionIndex> dissimilar;
};

double default_delta(const RegionCreditTable& table);

// For each anchor in `candidates` (all visited regions when empty): up to
// per_anchor similar regions (same label, |Δs| < δ) and as many dissimilar
// ones (other label, |Δs| > δ). Anchors lacking either kind are skipped.
// Throws DataError when a label class has no candidate.
std::vector<PairSample> sample_pairs(const RegionCreditTable& table, double delta, std::size_t per_anchor,
                                     std::uint64_t seed, std::span<const RegionIndex> candidates = {});

// Mean over (anchor, similar, dissimilar) triples.
ad::Var ren_similarity_loss(const ad::Var& embeddings, const std::vector<PairSample>& pairs,
                            SimilarityLoss form = SimilarityLoss::verbatim);

// Mean similar-pair inner product minus mean dissimilar-pair inner product.
double pair_separation(const Matrix& embeddings, const std::vector<PairSample>& pairs);

struct RenTrainResult {
  RenModel model;
  Matrix embeddings;  // b×dim
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  std::vector<std::vector<double>> attention_history;
  std::size_t best_epoch = 0;
  double holdout_accuracy = 0.0;
  std::vector<RegionIndex> train_regions;
  std::vector<RegionIndex> holdout_regions;
  std::vector<PairSample> pairs;
};

// Adam on classification + gamma·similarity over the training regions, early
// stopping on held-out region classification loss. Throws DivergenceError on
// a non-finite loss.
RenTrainResult train_ren(RenModel model, const RegionGraphSet& graphs, const Matrix& features,
                         const RegionCreditTable& table, const RenConfig& config);

Matrix ren_embed(const RenModel& model, const RegionGraphSet& graphs, const Matrix& features);

std::string ren_checkpoint_json(const RenModel& model);
RenModel ren_from_checkpoint_json(const std::string& text);

// `region,e0,...,e{dim-1}`
std::string embeddings_csv(const Matrix& embeddings);
Matrix embeddings_from_csv(const std::string& text);

}  // namespace creditprint
