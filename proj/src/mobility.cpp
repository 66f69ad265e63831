#include "creditprint/mobility.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "creditprint/errors.hpp"
#include "creditprint/rng.hpp"

namespace creditprint {

namespace {

constexpr std::string_view kTrajectoryHeader = "user_id,day,slot,region_row,region_col";
constexpr std::string_view kLabelHeader = "user_id,label";

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::int64_t parse_int(std::string_view field, std::size_t line, std::string_view column) {
  std::int64_t v = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw ParseError(line, "column '" + std::string(column) + "': not an integer: '" + std::string(field) + "'");
  }
  return v;
}

// Calls fn(line_number, fields) for every data row after checking the header.
template <typename F>
void for_each_row(const std::string& text, std::string_view header, std::size_t columns, F fn) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string_view line(text.data() + pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!seen_header) {
      if (line != header) throw ParseError(line_no, "expected header '" + std::string(header) + "'");
      seen_header = true;
      continue;
    }
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != columns) {
      throw ParseError(line_no, "expected " + std::to_string(columns) + " fields, got " + std::to_string(fields.size()));
    }
    fn(line_no, fields);
  }
  if (!seen_header) throw ParseError(1, "missing header '" + std::string(header) + "'");
}

}  // namespace

int RegionGrid::cell_distance(RegionIndex a, RegionIndex b) const {
  return std::max(std::abs(row_of(a) - row_of(b)), std::abs(col_of(a) - col_of(b)));
}

double RegionGrid::center_distance_km(RegionIndex a, RegionIndex b) const {
  const double dr = row_of(a) - row_of(b);
  const double dc = col_of(a) - col_of(b);
  return std::sqrt(dr * dr + dc * dc) * cell_km;
}

void RegionGrid::validate() const {
  if (rows <= 0 || cols <= 0) throw DataError("grid must have positive rows and cols");
  if (!(cell_km > 0.0) || !std::isfinite(cell_km)) throw DataError("grid cell_km must be positive");
}

std::string DatasetSplit::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFF;
      h *= 1099511628211ULL;
    }
  };
  for (const auto* part : {&train, &validation, &test}) {
    std::vector<UserId> ids = *part;
    std::sort(ids.begin(), ids.end());
    for (UserId id : ids) mix(static_cast<std::uint64_t>(id));
    mix(0xFFFFFFFFFFFFFFFFULL);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void validate_users(const std::vector<UserRecord>& users, const RegionGrid& grid) {
  grid.validate();
  const std::size_t b = grid.region_count();
  std::unordered_set<UserId> ids;
  for (const auto& u : users) {
    if (!ids.insert(u.user).second) throw DuplicateError("duplicate user " + std::to_string(u.user));
    if (u.label != 0 && u.label != 1) throw DataError("user " + std::to_string(u.user) + ": label must be 0 or 1");
    if (u.trajectories.empty()) throw DataError("user " + std::to_string(u.user) + " has no trajectories");
    for (const auto& t : u.trajectories) {
      if (t.visits.empty()) throw DataError("user " + std::to_string(u.user) + ": empty trajectory");
      for (std::size_t i = 0; i < t.visits.size(); ++i) {
        const auto& v = t.visits[i];
        if (v.slot < 0 || v.slot >= kSlotsPerDay) throw DataError("slot out of range");
        if (v.region >= b) throw BoundsError("region " + std::to_string(v.region) + " outside grid of " + std::to_string(b));
        if (i > 0 && t.visits[i - 1].slot >= v.slot) throw DataError("slots not strictly increasing");
      }
    }
  }
}

RegionGrid parse_grid_manifest(const std::string& text) {
  std::istringstream in(text);
  RegionGrid g;
  bool have_rows = false, have_cols = false, have_cell = false;
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw ParseError(1, "grid manifest token without '=': " + token);
    const std::string key = token.substr(0, eq);
    const std::string val = token.substr(eq + 1);
    try {
      if (key == "rows") {
        g.rows = std::stoi(val);
        have_rows = true;
      } else if (key == "cols") {
        g.cols = std::stoi(val);
        have_cols = true;
      } else if (key == "cell_km") {
        g.cell_km = std::stod(val);
        have_cell = true;
      } else {
        throw ParseError(1, "unknown grid manifest key: " + key);
      }
    } catch (const std::logic_error&) {
      throw ParseError(1, "bad grid manifest value for " + key + ": " + val);
    }
  }
  if (!have_rows || !have_cols || !have_cell) throw ParseError(1, "grid manifest needs rows, cols and cell_km");
  g.validate();
  return g;
}

std::string format_grid_manifest(const RegionGrid& grid) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", grid.cell_km);
  return "rows=" + std::to_string(grid.rows) + " cols=" + std::to_string(grid.cols) + " cell_km=" + buf + "\n";
}

RegionGrid load_grid(const std::filesystem::path& path) { return parse_grid_manifest(read_text_file(path)); }

std::vector<UserRecord> parse_dataset(const std::string& trajectory_csv, const std::string& label_csv,
                                      const RegionGrid& grid) {
  grid.validate();
  std::map<UserId, int> labels;
  for_each_row(label_csv, kLabelHeader, 2, [&](std::size_t line, const std::vector<std::string_view>& f) {
    const UserId id = parse_int(f[0], line, "user_id");
    const auto label = parse_int(f[1], line, "label");
    if (label != 0 && label != 1) throw ParseError(line, "label must be 0 or 1");
    if (!labels.emplace(id, static_cast<int>(label)).second) {
      throw DuplicateError("line " + std::to_string(line) + ": duplicate label for user " + std::to_string(id));
    }
  });

  std::map<UserId, std::map<int, std::vector<Visit>>> grouped;
  std::set<std::tuple<UserId, int, int>> keys;
  for_each_row(trajectory_csv, kTrajectoryHeader, 5, [&](std::size_t line, const std::vector<std::string_view>& f) {
    const UserId id = parse_int(f[0], line, "user_id");
    const auto day = parse_int(f[1], line, "day");
    const auto slot = parse_int(f[2], line, "slot");
    const auto row = parse_int(f[3], line, "region_row");
    const auto col = parse_int(f[4], line, "region_col");
    if (day < 0 || day > 1'000'000) throw ParseError(line, "day out of range");
    if (slot < 0 || slot >= kSlotsPerDay) throw ParseError(line, "slot must be in [0, 24)");
    if (!grid.contains(static_cast<int>(row), static_cast<int>(col))) {
      throw BoundsError("line " + std::to_string(line) + ": region (" + std::to_string(row) + "," +
                        std::to_string(col) + ") outside " + std::to_string(grid.rows) + "x" +
                        std::to_string(grid.cols) + " grid");
    }
    if (!keys.emplace(id, static_cast<int>(day), static_cast<int>(slot)).second) {
      throw DuplicateError("line " + std::to_string(line) + ": duplicate (user, day, slot) = (" + std::to_string(id) +
                           ", " + std::to_string(day) + ", " + std::to_string(slot) + ")");
    }
    grouped[id][static_cast<int>(day)].push_back(
        Visit{static_cast<int>(slot), grid.index(static_cast<int>(row), static_cast<int>(col))});
  });

  for (const auto& [id, days] : grouped) {
    if (!labels.contains(id)) throw DataError("user " + std::to_string(id) + " has trajectories but no label");
  }

  std::vector<UserRecord> users;
  users.reserve(labels.size());
  for (const auto& [id, label] : labels) {
    auto it = grouped.find(id);
    if (it == grouped.end()) throw DataError("user " + std::to_string(id) + " is labeled but has no trajectories");
    UserRecord u{id, label, {}};
    for (auto& [day, visits] : it->second) {
      std::sort(visits.begin(), visits.end(), [](const Visit& a, const Visit& b) { return a.slot < b.slot; });
      u.trajectories.push_back(Trajectory{id, day, std::move(visits)});
    }
    users.push_back(std::move(u));
  }
  return users;
}

std::vector<UserRecord> load_dataset(const std::filesystem::path& trajectory_file,
                                     const std::filesystem::path& label_file, const RegionGrid& grid) {
  return parse_dataset(read_text_file(trajectory_file), read_text_file(label_file), grid);
}

std::string format_trajectory_csv(const std::vector<UserRecord>& users, const RegionGrid& grid) {
  std::vector<const UserRecord*> order;
  for (const auto& u : users) order.push_back(&u);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->user < b->user; });
  std::string out(kTrajectoryHeader);
  out += '\n';
  for (const auto* u : order) {
    std::vector<const Trajectory*> days;
    for (const auto& t : u->trajectories) days.push_back(&t);
    std::sort(days.begin(), days.end(), [](auto* a, auto* b) { return a->day < b->day; });
    for (const auto* t : days) {
      for (const auto& v : t->visits) {
        out += std::to_string(u->user) + ',' + std::to_string(t->day) + ',' + std::to_string(v.slot) + ',' +
               std::to_string(grid.row_of(v.region)) + ',' + std::to_string(grid.col_of(v.region)) + '\n';
      }
    }
  }
  return out;
}

std::string format_label_csv(const std::vector<UserRecord>& users) {
  std::vector<std::pair<UserId, int>> rows;
  for (const auto& u : users) rows.emplace_back(u.user, u.label);
  std::sort(rows.begin(), rows.end());
  std::string out(kLabelHeader);
  out += '\n';
  for (const auto& [id, label] : rows) out += std::to_string(id) + ',' + std::to_string(label) + '\n';
  return out;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  validate_users(ds.users, ds.grid);
  write_text_file(dir / kTrajectoryFile, format_trajectory_csv(ds.users, ds.grid));
  write_text_file(dir / kLabelFile, format_label_csv(ds.users));
  write_text_file(dir / kGridFile, format_grid_manifest(ds.grid));
}

Dataset load_dataset_dir(const std::filesystem::path& dir) {
  Dataset ds;
  ds.grid = load_grid(dir / kGridFile);
  ds.users = load_dataset(dir / kTrajectoryFile, dir / kLabelFile, ds.grid);
  return ds;
}

DatasetSplit split_users(const std::vector<UserRecord>& users, SplitFractions fractions, std::uint64_t seed) {
  const std::size_t n = users.size();
  if (n < 10) throw DataError("split_users: need at least 10 users, got " + std::to_string(n));
  if (fractions.train < 0 || fractions.validation < 0 || fractions.test < 0 ||
      std::abs(fractions.train + fractions.validation + fractions.test - 1.0) > 1e-9) {
    throw ConfigError("split", "fractions must be non-negative and sum to 1");
  }
  const double nd = static_cast<double>(n);
  std::array<std::size_t, 3> sizes{};
  sizes[0] = static_cast<std::size_t>(std::llround(fractions.train * nd));
  sizes[1] = static_cast<std::size_t>(std::llround(fractions.validation * nd));
  sizes[1] = std::min(sizes[1], n - sizes[0]);
  sizes[2] = n - sizes[0] - sizes[1];

  std::array<std::vector<UserId>, 2> by_class;
  for (const auto& u : users) by_class[u.label == 1 ? 1 : 0].push_back(u.user);
  for (auto& v : by_class) std::sort(v.begin(), v.end());
  Rng rng(seed);
  for (auto& v : by_class) rng.shuffle(v);

  // Largest-remainder apportionment of positives across the three parts.
  const std::size_t positives = by_class[1].size();
  std::array<std::size_t, 3> pos{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double quota = static_cast<double>(sizes[k]) * static_cast<double>(positives) / nd;
    pos[k] = static_cast<std::size_t>(std::floor(quota));
    remainder[k] = quota - std::floor(quota);
    assigned += pos[k];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return remainder[a] > remainder[b]; });
  for (int k : order) {
    if (assigned >= positives) break;
    if (pos[k] < sizes[k]) {
      ++pos[k];
      ++assigned;
    }
  }

  DatasetSplit split;
  std::array<std::vector<UserId>*, 3> parts{&split.train, &split.validation, &split.test};
  std::size_t next_pos = 0, next_neg = 0;
  for (int k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < pos[k]; ++i) parts[k]->push_back(by_class[1][next_pos++]);
    for (std::size_t i = pos[k]; i < sizes[k]; ++i) parts[k]->push_back(by_class[0][next_neg++]);
    std::sort(parts[k]->begin(), parts[k]->end());
  }
  return split;
}

std::vector<UserRecord> select_users(const std::vector<UserRecord>& users, const std::vector<UserId>& ids) {
  std::unordered_set<UserId> wanted(ids.begin(), ids.end());
  std::vector<UserRecord> out;
  for (const auto& u : users)
    if (wanted.contains(u.user)) out.push_back(u);
  return out;
}

std::array<double, kContextDim> context_features(const Trajectory& t) {
  std::array<double, kContextDim> c{};
  c[static_cast<std::size_t>(day_of_week(t.day))] = 1.0;
  c[is_weekend(t.day) ? 8 : 7] = 1.0;
  return c;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string(), "write failed");
}

}  // namespace creditprint
