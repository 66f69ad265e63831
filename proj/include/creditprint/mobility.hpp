#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace creditprint {

using UserId = std::int64_t;
using RegionIndex = std::size_t;

inline constexpr int kSlotsPerDay = 24;
inline constexpr std::size_t kContextDim = 9;

// Equal-size cells; region index = row * cols + col.
struct RegionGrid {
  int rows = 0;
  int cols = 0;
  double cell_km = 1.0;

  std::size_t region_count() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
  RegionIndex index(int row, int col) const {
    return static_cast<RegionIndex>(row) * static_cast<RegionIndex>(cols) + static_cast<RegionIndex>(col);
  }
  int row_of(RegionIndex r) const { return static_cast<int>(r / static_cast<RegionIndex>(cols)); }
  int col_of(RegionIndex r) const { return static_cast<int>(r % static_cast<RegionIndex>(cols)); }
  bool contains(int row, int col) const { return row >= 0 && row < rows && col >= 0 && col < cols; }
  // Chebyshev distance in cells.
  int cell_distance(RegionIndex a, RegionIndex b) const;
  // Euclidean distance between cell centres in km.
  double center_distance_km(RegionIndex a, RegionIndex b) const;

  void validate() const;
  friend bool operator==(const RegionGrid&, const RegionGrid&) = default;
};

struct Visit {
  int slot = 0;  // hour of day, [0, 24)
  RegionIndex region = 0;
  friend bool operator==(const Visit&, const Visit&) = default;
};

// One user-day of visits, slots strictly increasing.
struct Trajectory {
  UserId user = 0;
  int day = 0;
  std::vector<Visit> visits;
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct UserRecord {
  UserId user = 0;
  int label = 0;  // 1 = low credit
  std::vector<Trajectory> trajectories;
  friend bool operator==(const UserRecord&, const UserRecord&) = default;
};

struct Dataset {
  RegionGrid grid;
  std::vector<UserRecord> users;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct DatasetSplit {
  std::vector<UserId> train;
  std::vector<UserId> validation;
  std::vector<UserId> test;

  // FNV-1a over the three sorted id lists.
  std::string hash() const;
  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

struct SplitFractions {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

// Checks trajectory and user invariants against the grid; throws DataError.
void validate_users(const std::vector<UserRecord>& users, const RegionGrid& grid);

// --- file formats ------------------------------------------------------

// `rows=<n> cols=<n> cell_km=<real>`
RegionGrid parse_grid_manifest(const std::string& text);
std::string format_grid_manifest(const RegionGrid& grid);
RegionGrid load_grid(const std::filesystem::path& path);

std::vector<UserRecord> load_dataset(const std::filesystem::path& trajectory_file,
                                     const std::filesystem::path& label_file, const RegionGrid& grid);
// Same, but from in-memory CSV text.
std::vector<UserRecord> parse_dataset(const std::string& trajectory_csv, const std::string& label_csv,
                                      const RegionGrid& grid);

std::string format_trajectory_csv(const std::vector<UserRecord>& users, const RegionGrid& grid);
std::string format_label_csv(const std::vector<UserRecord>& users);

// Writes trajectories.csv, labels.csv and grid.txt into dir.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset_dir(const std::filesystem::path& dir);

inline constexpr const char* kTrajectoryFile = "trajectories.csv";
inline constexpr const char* kLabelFile = "labels.csv";
inline constexpr const char* kGridFile = "grid.txt";

// --- splitting ---------------------------------------------------------

// Stratified, seeded partition. Part sizes are round(0.8n), round(0.1n) and
// the remainder; positives per part follow largest-remainder apportionment.
DatasetSplit split_users(const std::vector<UserRecord>& users, SplitFractions fractions, std::uint64_t seed);

// Users whose ids appear in `ids`, in the order of `users`.
std::vector<UserRecord> select_users(const std::vector<UserRecord>& users, const std::vector<UserId>& ids);

// --- context -----------------------------------------------------------

// Day index 0 is a Monday.
inline int day_of_week(int day) { return ((day % 7) + 7) % 7; }
inline bool is_weekend(int day) { return day_of_week(day) >= 5; }

// One-hot day of week (7) followed by one-hot weekday/weekend (2).
std::array<double, kContextDim> context_features(const Trajectory& t);

// --- small IO helpers shared by the other modules ------------------------

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace creditprint
