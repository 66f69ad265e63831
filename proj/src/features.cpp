#include "creditprint/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "creditprint/errors.hpp"
#include "creditprint/format.hpp"

namespace creditprint {

ManualFeatures manual_features(const UserRecord& user, const RegionGrid& grid) {
  // (day, slot) -> region, keeping one record per slot.
  std::map<std::pair<int, int>, RegionIndex> events;
  for (const auto& t : user.trajectories)
    for (const auto& v : t.visits) events.emplace(std::make_pair(t.day, v.slot), v.region);

  std::map<int, std::set<RegionIndex>> per_day;
  std::map<RegionIndex, std::size_t> counts;
  for (const auto& [key, region] : events) {
    per_day[key.first].insert(region);
    ++counts[region];
  }

  ManualFeatures f;
  if (per_day.empty()) return f;

  std::vector<double> daily;
  double weekday_total = 0.0, weekend_total = 0.0;
  std::size_t weekday_days = 0, weekend_days = 0;
  for (const auto& [day, regions] : per_day) {
    const double n = static_cast<double>(regions.size());
    daily.push_back(n);
    if (is_weekend(day)) {
      weekend_total += n;
      ++weekend_days;
    } else {
      weekday_total += n;
      ++weekday_days;
    }
  }
  const double days = static_cast<double>(daily.size());
  double mean = 0.0;
  for (double d : daily) mean += d;
  mean /= days;
  double var = 0.0;
  for (double d : daily) var += (d - mean) * (d - mean);
  f.num_daily_region = mean;
  f.std_daily_region = std::sqrt(var / days);
  f.num_record_days = days;
  if (weekday_days > 0 && weekend_days > 0) {
    f.weekday_weekend_diff = weekday_total / static_cast<double>(weekday_days) - weekend_total / static_cast<double>(weekend_days);
  }

  const double total = static_cast<double>(events.size());
  RegionIndex modal = counts.begin()->first;
  std::size_t modal_count = 0;
  for (const auto& [region, c] : counts) {
    const double p = static_cast<double>(c) / total;
    f.region_entropy -= p * std::log(p);
    if (c > modal_count) {  // map order makes ties resolve to the lowest index
      modal = region;
      modal_count = c;
    }
  }
  f.region_entropy = std::max(0.0, f.region_entropy);
  double radius = 0.0;
  for (const auto& [region, c] : counts) radius += grid.center_distance_km(region, modal);
  f.turning_radius = radius / static_cast<double>(counts.size());
  return f;
}

Matrix manual_feature_matrix(const std::vector<UserRecord>& users, const RegionGrid& grid) {
  Matrix m(users.size(), kManualFeatureDim);
  for (std::size_t i = 0; i < users.size(); ++i) {
    const auto f = manual_features(users[i], grid).as_array();
    std::copy(f.begin(), f.end(), m.row(i).begin());
  }
  return m;
}

std::string features_csv(const std::vector<UserRecord>& users, const RegionGrid& grid) {
  std::string out = "user_id";
  for (const char* name : kManualFeatureNames) out += std::string(",") + name;
  out += '\n';
  for (const auto& u : users) {
    out += std::to_string(u.user);
    for (double v : manual_features(u, grid).as_array()) out += "," + format_double(v);
    out += '\n';
  }
  return out;
}

Standardizer Standardizer::fit(const Matrix& train_rows) {
  if (train_rows.rows() == 0) throw DataError("Standardizer::fit: no rows");
  Standardizer s;
  const double n = static_cast<double>(train_rows.rows());
  s.mean.assign(train_rows.cols(), 0.0);
  s.stddev.assign(train_rows.cols(), 0.0);
  for (std::size_t r = 0; r < train_rows.rows(); ++r)
    for (std::size_t c = 0; c < train_rows.cols(); ++c) s.mean[c] += train_rows(r, c);
  for (double& m : s.mean) m /= n;
  for (std::size_t r = 0; r < train_rows.rows(); ++r)
    for (std::size_t c = 0; c < train_rows.cols(); ++c) {
      const double d = train_rows(r, c) - s.mean[c];
      s.stddev[c] += d * d;
    }
  for (double& v : s.stddev) {
    v = std::sqrt(v / n);
    if (!(v > 1e-12)) v = 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& rows) const {
  if (rows.cols() != mean.size()) throw DimensionError("Standardizer::apply: expected " + std::to_string(mean.size()) + " columns");
  Matrix out = rows;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = (out(r, c) - mean[c]) / stddev[c];
  return out;
}

std::vector<double> Standardizer::apply(std::span<const double> row) const {
  if (row.size() != mean.size()) throw DimensionError("Standardizer::apply: row length mismatch");
  std::vector<double> out(row.size());
  for (std::size_t c = 0; c < row.size(); ++c) out[c] = (row[c] - mean[c]) / stddev[c];
  return out;
}

nlohmann::ordered_json Standardizer::to_json() const { return {{"mean", mean}, {"stddev", stddev}}; }

Standardizer Standardizer::from_json(const nlohmann::ordered_json& j) {
  Standardizer s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.stddev = j.at("stddev").get<std::vector<double>>();
  return s;
}

}  // namespace creditprint
