#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "creditprint/baselines.hpp"
#include "creditprint/features.hpp"
#include "creditprint/mobility.hpp"
#include "creditprint/region_graphs.hpp"
#include "creditprint/ren.hpp"
#include "creditprint/report.hpp"
#include "creditprint/tcan.hpp"

namespace creditprint {

struct PipelineConfig {
  SplitFractions fractions;
  GraphConfig graph;
  std::vector<GraphKind> graph_kinds{kAllGraphKinds.begin(), kAllGraphKinds.end()};
  RenConfig ren;
  TcanConfig tcan;
  LogisticConfig logistic;
  MlpConfig mlp;
  std::uint64_t seed = 1;

  // Copy with every stochastic component keyed to `seed`.
  PipelineConfig with_seed(std::uint64_t seed) const;
};

// Split-derived user sets with manual features standardized on train users.
struct PreparedData {
  DatasetSplit split;
  std::vector<UserRecord> train_users, validation_users, test_users;
  Standardizer standardizer;
  Matrix train_manual, validation_manual, test_manual;  // standardized
  std::vector<UserSample> train, validation, test;
};

PreparedData prepare_data(const Dataset& dataset, const DatasetSplit& split);

// Everything learned from training users before the credit network.
struct StageOne {
  RegionCreditTable table;
  RegionGraphSet graphs;
  Matrix features;  // REN input
  RenTrainResult ren;
};

RegionCreditTable stage_region_table(const PreparedData& data, const RegionGrid& grid);
StageOne run_stage_one(const PreparedData& data, const RegionGrid& grid, const PipelineConfig& config);

struct StageTwo {
  TcanTrainResult tcan;
  std::vector<double> test_probabilities;
  double test_auc = 0.0;  // NaN when the test users are all of one class
};

// Trains the credit network on `region_repr` and scores the test users.
StageTwo run_stage_two(const PreparedData& data, const Matrix& region_repr, const TcanConfig& config);

enum class Variant {
  manual_lr,
  manual_nn,
  without_ren,
  without_ten,
  full,
  single_distance,
  single_interaction,
  single_correlation,
  gamma_ren_0,
  gamma_tcan_0,
};

inline constexpr std::array<Variant, 10> kAllVariants{
    Variant::manual_lr,          Variant::manual_nn,        Variant::without_ren,        Variant::without_ten,
    Variant::full,               Variant::single_distance,  Variant::single_interaction, Variant::single_correlation,
    Variant::gamma_ren_0,        Variant::gamma_tcan_0};

std::string variant_name(Variant v);
Variant variant_from_string(const std::string& name);

struct ExperimentConfig {
  PipelineConfig pipeline;
  std::vector<std::uint64_t> seeds{1};
  std::vector<Variant> variants{kAllVariants.begin(), kAllVariants.end()};
  bool sweep = false;
  std::vector<std::size_t> sweep_region_dims{8, 16, 32, 64};
  std::vector<std::size_t> sweep_trajectory_dims{32, 64, 128, 256};
};

using ProgressFn = std::function<void(const std::string&)>;

// Every variant of a seed shares one split. A failing variant is recorded
// with status "failed" and the matrix continues.
EvalReport run_experiment_matrix(const Dataset& dataset, const ExperimentConfig& config,
                                 const ProgressFn& progress = {});

// Pairs over all visited regions, sampled with a seed independent of
// training, so embeddings from different runs are compared on one set.
std::vector<PairSample> diagnostic_pairs(const RegionCreditTable& table, const RenConfig& config, std::uint64_t seed);

}  // namespace creditprint
