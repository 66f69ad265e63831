#include "creditprint/region_graphs.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "creditprint/errors.hpp"

namespace creditprint {

std::vector<RegionIndex> RegionCreditTable::visited_regions() const {
  std::vector<RegionIndex> out;
  for (RegionIndex r = 0; r < visitors.size(); ++r)
    if (visitors[r] > 0) out.push_back(r);
  return out;
}

RegionCreditTable region_credit_scores(const std::vector<UserRecord>& train_users, const RegionGrid& grid) {
  if (train_users.empty()) throw DataError("region_credit_scores: no users");
  const std::size_t b = grid.region_count();
  RegionCreditTable t;
  t.low_visitors.assign(b, 0);
  t.visitors.assign(b, 0);
  std::vector<std::size_t> hour_low(b * kSlotsPerDay, 0);
  std::vector<std::size_t> hour_all(b * kSlotsPerDay, 0);

  for (const auto& u : train_users) {
    std::vector<RegionIndex> regions;
    std::vector<std::size_t> region_hours;
    for (const auto& traj : u.trajectories) {
      for (const auto& v : traj.visits) {
        if (v.region >= b) throw BoundsError("region " + std::to_string(v.region) + " outside grid");
        regions.push_back(v.region);
        region_hours.push_back(v.region * kSlotsPerDay + static_cast<std::size_t>(v.slot));
      }
    }
    std::sort(regions.begin(), regions.end());
    regions.erase(std::unique(regions.begin(), regions.end()), regions.end());
    std::sort(region_hours.begin(), region_hours.end());
    region_hours.erase(std::unique(region_hours.begin(), region_hours.end()), region_hours.end());
    for (RegionIndex r : regions) {
      ++t.visitors[r];
      if (u.label == 1) ++t.low_visitors[r];
    }
    for (std::size_t rh : region_hours) {
      ++hour_all[rh];
      if (u.label == 1) ++hour_low[rh];
    }
  }

  std::vector<double> visited_scores;
  t.score.assign(b, 0.0);
  for (RegionIndex r = 0; r < b; ++r) {
    if (t.visitors[r] > 0) {
      t.score[r] = static_cast<double>(t.low_visitors[r]) / static_cast<double>(t.visitors[r]);
      visited_scores.push_back(t.score[r]);
    }
  }
  if (visited_scores.empty()) throw DataError("region_credit_scores: no visited regions");

  double total = 0.0;
  for (double s : visited_scores) total += s;
  t.global_mean = total / static_cast<double>(visited_scores.size());
  std::sort(visited_scores.begin(), visited_scores.end());
  const std::size_t n = visited_scores.size();
  t.median = n % 2 == 1 ? visited_scores[n / 2] : 0.5 * (visited_scores[n / 2 - 1] + visited_scores[n / 2]);

  t.label.assign(b, 0);
  t.dynamic.assign(b, {});
  for (RegionIndex r = 0; r < b; ++r) {
    if (t.visitors[r] == 0) {
      t.score[r] = t.global_mean;
      t.dynamic[r].fill(t.global_mean);
      continue;
    }
    t.label[r] = t.score[r] > t.median ? 1 : 0;
    for (int h = 0; h < kSlotsPerDay; ++h) {
      const std::size_t all = hour_all[r * kSlotsPerDay + static_cast<std::size_t>(h)];
      t.dynamic[r][static_cast<std::size_t>(h)] =
          all == 0 ? t.score[r]
                   : static_cast<double>(hour_low[r * kSlotsPerDay + static_cast<std::size_t>(h)]) / static_cast<double>(all);
    }
  }
  return t;
}

std::string to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::distance:
      return "distance";
    case GraphKind::interaction:
      return "interaction";
    case GraphKind::correlation:
      return "correlation";
  }
  return "unknown";
}

GraphKind graph_kind_from_string(const std::string& name) {
  for (GraphKind k : kAllGraphKinds)
    if (to_string(k) == name) return k;
  throw ConfigError("ren.graphs", "unknown graph kind '" + name + "'");
}

Matrix build_distance_graph(const RegionGrid& grid) {
  grid.validate();
  const std::size_t b = grid.region_count();
  Matrix a(b, b);
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if ((dr == 0 && dc == 0) || !grid.contains(r + dr, c + dc)) continue;
          a(grid.index(r, c), grid.index(r + dr, c + dc)) = 1.0;
        }
      }
    }
  }
  return a;
}

Matrix build_interaction_graph(const std::vector<UserRecord>& train_users, std::size_t region_count,
                               std::size_t min_cooccurrence) {
  if (min_cooccurrence < 1) throw ConfigError("graph.min_cooccurrence", "must be at least 1");
  Matrix a(region_count, region_count);
  std::vector<RegionIndex> regions;
  for (const auto& u : train_users) {
    for (const auto& traj : u.trajectories) {
      regions.clear();
      for (const auto& v : traj.visits) {
        if (v.region >= region_count) throw BoundsError("region " + std::to_string(v.region) + " outside graph");
        regions.push_back(v.region);
      }
      std::sort(regions.begin(), regions.end());
      regions.erase(std::unique(regions.begin(), regions.end()), regions.end());
      for (std::size_t i = 0; i < regions.size(); ++i) {
        for (std::size_t j = i + 1; j < regions.size(); ++j) {
          a(regions[i], regions[j]) += 1.0;
          a(regions[j], regions[i]) += 1.0;
        }
      }
    }
  }
  const double threshold = static_cast<double>(min_cooccurrence);
  for (double& v : a.data())
    if (v < threshold) v = 0.0;
  return a;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw DimensionError("pearson: length mismatch");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  // Rounding leaves tiny residuals on constant inputs.
  const double tiny = 1e-24 * n;
  if (saa <= tiny || sbb <= tiny) return std::nan("");
  return sab / std::sqrt(saa * sbb);
}

Matrix build_correlation_graph(const RegionCreditTable& table, std::size_t min_visits, double rho_threshold) {
  if (!(rho_threshold > 0.0 && rho_threshold < 1.0)) throw ConfigError("graph.rho_threshold", "must be in (0, 1)");
  const std::size_t b = table.region_count();
  Matrix a(b, b);
  std::vector<RegionIndex> eligible;
  for (RegionIndex r = 0; r < b; ++r)
    if (table.visitors[r] >= min_visits && table.visitors[r] > 0) eligible.push_back(r);
  for (std::size_t x = 0; x < eligible.size(); ++x) {
    for (std::size_t y = x + 1; y < eligible.size(); ++y) {
      const RegionIndex i = eligible[x], j = eligible[y];
      const double rho = pearson(table.dynamic[i], table.dynamic[j]);
      if (std::isnan(rho) || rho < rho_threshold) continue;
      a(i, j) = rho;
      a(j, i) = rho;
    }
  }
  return a;
}

Matrix normalize_adjacency(const Matrix& adjacency, bool degree_with_self_loops) {
  if (adjacency.rows() != adjacency.cols()) {
    throw DimensionError("normalize_adjacency: matrix must be square, got " + adjacency.shape_str());
  }
  const std::size_t n = adjacency.rows();
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (double v : adjacency.row(i)) deg += v;
    if (degree_with_self_loops) {
      deg += 1.0;
    } else if (deg <= 0.0) {
      deg = 1.0;
    }
    inv_sqrt[i] = 1.0 / std::sqrt(deg);
  }
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double a = adjacency(i, j) + (i == j ? 1.0 : 0.0);
      out(i, j) = a == 0.0 ? 0.0 : inv_sqrt[i] * a * inv_sqrt[j];
    }
  }
  return out;
}

RegionGraphSet build_region_graphs(const std::vector<UserRecord>& train_users, const RegionGrid& grid,
                                   const RegionCreditTable& table, const GraphConfig& config,
                                   const std::vector<GraphKind>& kinds) {
  if (kinds.empty()) throw ConfigError("ren.graphs", "at least one graph kind is required");
  RegionGraphSet set;
  for (GraphKind kind : kinds) {
    Matrix a;
    switch (kind) {
      case GraphKind::distance:
        a = build_distance_graph(grid);
        break;
      case GraphKind::interaction:
        a = build_interaction_graph(train_users, grid.region_count(), config.min_cooccurrence);
        break;
      case GraphKind::correlation:
        a = build_correlation_graph(table, config.min_visits, config.rho_threshold);
        break;
    }
    set.kinds.push_back(kind);
    set.normalized.push_back(normalize_adjacency(a, config.degree_with_self_loops));
    set.adjacency.push_back(std::move(a));
  }
  return set;
}

bool is_symmetric(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j)
      if (std::abs(m(i, j) - m(j, i)) > tol) return false;
  return true;
}

std::string graphs_to_json(const RegionGraphSet& graphs, const RegionCreditTable& table) {
  nlohmann::ordered_json j;
  j["region_count"] = table.region_count();
  nlohmann::ordered_json g = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < graphs.kinds.size(); ++k) {
    nlohmann::ordered_json triplets = nlohmann::ordered_json::array();
    const Matrix& a = graphs.adjacency[k];
    for (std::size_t r = 0; r < a.rows(); ++r)
      for (std::size_t c = r + 1; c < a.cols(); ++c)
        if (a(r, c) != 0.0) triplets.push_back({r, c, a(r, c)});
    g[to_string(graphs.kinds[k])] = std::move(triplets);
  }
  j["graphs"] = std::move(g);
  nlohmann::ordered_json t;
  t["median"] = table.median;
  t["global_mean"] = table.global_mean;
  t["visitors"] = table.visitors;
  t["low_visitors"] = table.low_visitors;
  t["score"] = table.score;
  t["label"] = table.label;
  t["dynamic"] = table.dynamic;
  j["credit_table"] = std::move(t);
  return j.dump(1) + "\n";
}

}  // namespace creditprint
