#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "creditprint/matrix.hpp"
#include "creditprint/mobility.hpp"

namespace creditprint {

// Per-region credit statistics computed from training users only.
struct RegionCreditTable {
  std::vector<std::size_t> low_visitors;  // distinct low-credit visitors
  std::vector<std::size_t> visitors;      // distinct visitors
  std::vector<double> score;              // low_visitors / visitors, or global_mean if unvisited
  std::vector<int> label;                 // 1 iff score > median over visited regions
  std::vector<std::array<double, kSlotsPerDay>> dynamic;  // hourly low-credit visitor ratio
  double median = 0.0;
  double global_mean = 0.0;

  std::size_t region_count() const { return score.size(); }
  bool visited(RegionIndex r) const { return visitors[r] > 0; }
  std::vector<RegionIndex> visited_regions() const;
};

// Visitors are counted as distinct users. Hours in which a visited region has
// no visitor take the region's overall score; unvisited regions take the
// global mean everywhere. Throws DataError when no region is visited.
RegionCreditTable region_credit_scores(const std::vector<UserRecord>& train_users, const RegionGrid& grid);

enum class GraphKind { distance, interaction, correlation };

std::string to_string(GraphKind kind);
GraphKind graph_kind_from_string(const std::string& name);
inline constexpr std::array<GraphKind, 3> kAllGraphKinds{GraphKind::distance, GraphKind::interaction,
                                                         GraphKind::correlation};

struct GraphConfig {
  std::size_t min_cooccurrence = 3;
  double rho_threshold = 0.6;
  std::size_t min_visits = 5;
  // Degrees of A + I (default) or of A alone, with isolated nodes given degree 1.
  bool degree_with_self_loops = true;
};

// 8-neighbourhood adjacency, binary weights.
Matrix build_distance_graph(const RegionGrid& grid);
// Weight = number of trajectories containing both regions, kept when at least
// min_cooccurrence.
Matrix build_interaction_graph(const std::vector<UserRecord>& train_users, std::size_t region_count,
                               std::size_t min_cooccurrence);
// Weight = Pearson correlation of hourly dynamic vectors when both regions
// have at least min_visits visitors and rho >= rho_threshold.
Matrix build_correlation_graph(const RegionCreditTable& table, std::size_t min_visits, double rho_threshold);

// D^{-1/2} (A + I) D^{-1/2}.
Matrix normalize_adjacency(const Matrix& adjacency, bool degree_with_self_loops = true);

// NaN when either input has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

struct RegionGraphSet {
  std::vector<GraphKind> kinds;
  std::vector<Matrix> adjacency;
  std::vector<Matrix> normalized;
};

RegionGraphSet build_region_graphs(const std::vector<UserRecord>& train_users, const RegionGrid& grid,
                                   const RegionCreditTable& table, const GraphConfig& config,
                                   const std::vector<GraphKind>& kinds = {kAllGraphKinds.begin(), kAllGraphKinds.end()});

bool is_symmetric(const Matrix& m, double tol = 0.0);

// graphs.json: upper-triangle (i < j) triplets per graph kind plus the credit table.
std::string graphs_to_json(const RegionGraphSet& graphs, const RegionCreditTable& table);

}  // namespace creditprint
