#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "creditprint/matrix.hpp"
#include "creditprint/mobility.hpp"

namespace creditprint {

inline constexpr std::size_t kManualFeatureDim = 6;
inline constexpr std::array<const char*, kManualFeatureDim> kManualFeatureNames{
    "num_daily_region", "std_daily_region",     "region_entropy",
    "turning_radius",   "weekday_weekend_diff", "num_record_days"};

struct ManualFeatures {
  double num_daily_region = 0.0;      // mean distinct regions per recorded day
  double std_daily_region = 0.0;      // population std of that daily count
  double region_entropy = 0.0;        // natural-log entropy of visit-event frequencies
  double turning_radius = 0.0;        // mean km from distinct regions to the modal region
  double weekday_weekend_diff = 0.0;  // weekday mean distinct count minus weekend mean
  double num_record_days = 0.0;       // days with at least one visit

  std::array<double, kManualFeatureDim> as_array() const {
    return {num_daily_region, std_daily_region, region_entropy, turning_radius, weekday_weekend_diff, num_record_days};
  }
};

// Duplicate visit records within the same (day, slot) count once; trajectory
// storage order does not matter. Modal-region ties go to the lowest index.
ManualFeatures manual_features(const UserRecord& user, const RegionGrid& grid);

// users × 6 raw feature matrix, rows in the order given.
Matrix manual_feature_matrix(const std::vector<UserRecord>& users, const RegionGrid& grid);

// `user_id` plus the six raw feature columns.
std::string features_csv(const std::vector<UserRecord>& users, const RegionGrid& grid);

// Column standardization with statistics from the training rows only.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;  // zero-variance columns keep scale 1

  static Standardizer fit(const Matrix& train_rows);
  Matrix apply(const Matrix& rows) const;
  std::vector<double> apply(std::span<const double> row) const;

  nlohmann::ordered_json to_json() const;
  static Standardizer from_json(const nlohmann::ordered_json& j);
  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

}  // namespace creditprint
