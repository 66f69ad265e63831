#include "creditprint/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "creditprint/errors.hpp"
#include "creditprint/rng.hpp"

namespace creditprint {

namespace {

constexpr double kAnchorTilt = 3.0;
constexpr int kWorkRadius = 4;
constexpr int kLeisureRadius = 3;
constexpr double kDayObserved = 0.9;
constexpr double kEveningOut = 0.3;
constexpr double kWeekendOut = 0.6;

std::vector<double> latent_propensity(const RegionGrid& grid, Rng& rng) {
  const std::size_t b = grid.region_count();
  std::vector<double> field(b);
  for (double& v : field) v = rng.uniform();
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<double> next(b);
    for (int r = 0; r < grid.rows; ++r) {
      for (int c = 0; c < grid.cols; ++c) {
        double total = 0.0;
        int count = 0;
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc)
            if (grid.contains(r + dr, c + dc)) {
              total += field[grid.index(r + dr, c + dc)];
              ++count;
            }
        next[grid.index(r, c)] = total / count;
      }
    }
    field = std::move(next);
  }
  std::vector<std::size_t> order(b);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) { return field[a] < field[c]; });
  std::vector<double> p(b);
  for (std::size_t rank = 0; rank < b; ++rank) p[order[rank]] = (static_cast<double>(rank) + 0.5) / static_cast<double>(b);
  return p;
}

// Samples a region within `radius` of `center` (any region if radius < 0),
// avoiding `center` when another candidate exists.
RegionIndex sample_anchor(const RegionGrid& grid, const std::vector<double>& propensity, double tilt,
                          RegionIndex center, int radius, Rng& rng) {
  std::vector<RegionIndex> candidates;
  for (RegionIndex r = 0; r < grid.region_count(); ++r) {
    if (radius >= 0 && (r == center || grid.cell_distance(r, center) > radius)) continue;
    candidates.push_back(r);
  }
  if (candidates.empty()) return center;
  std::vector<double> w;
  w.reserve(candidates.size());
  for (RegionIndex r : candidates) w.push_back(std::exp(tilt * (2.0 * propensity[r] - 1.0)));
  return candidates[rng.weighted_index(w)];
}

int sign(int v) { return (v > 0) - (v < 0); }

RegionIndex step_toward(const RegionGrid& grid, RegionIndex from, RegionIndex to) {
  const int r = grid.row_of(from) + sign(grid.row_of(to) - grid.row_of(from));
  const int c = grid.col_of(from) + sign(grid.col_of(to) - grid.col_of(from));
  return grid.index(r, c);
}

RegionIndex random_neighbor(const RegionGrid& grid, RegionIndex from, Rng& rng) {
  std::vector<RegionIndex> nb;
  const int r0 = grid.row_of(from), c0 = grid.col_of(from);
  for (int dr = -1; dr <= 1; ++dr)
    for (int dc = -1; dc <= 1; ++dc)
      if ((dr != 0 || dc != 0) && grid.contains(r0 + dr, c0 + dc)) nb.push_back(grid.index(r0 + dr, c0 + dc));
  if (nb.empty()) return from;
  return nb[rng.index(nb.size())];
}

}  // namespace

void SynthConfig::validate() const {
  if (users <= 0) throw ConfigError("synth.users", "must be positive");
  if (!(low_credit_fraction >= 0.0 && low_credit_fraction <= 1.0)) {
    throw ConfigError("synth.low_credit_fraction", "must be in [0, 1]");
  }
  if (grid_rows <= 0) throw ConfigError("synth.grid_rows", "must be positive");
  if (grid_cols <= 0) throw ConfigError("synth.grid_cols", "must be positive");
  if (!(cell_km > 0.0) || !std::isfinite(cell_km)) throw ConfigError("synth.cell_km", "must be positive");
  if (days <= 0) throw ConfigError("synth.days", "must be positive");
  if (!(signal_strength >= 0.0 && signal_strength <= 1.0)) throw ConfigError("synth.beta", "must be in [0, 1]");
  if (!(manual_feature_signal >= 0.0 && manual_feature_signal <= 1.0)) {
    throw ConfigError("synth.manual_signal", "must be in [0, 1]");
  }
}

SynthResult generate_synthetic(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);
  SynthResult out;
  RegionGrid& grid = out.dataset.grid;
  grid = RegionGrid{config.grid_rows, config.grid_cols, config.cell_km};
  out.propensity = latent_propensity(grid, rng);

  for (int uid = 0; uid < config.users; ++uid) {
    Rng urng = rng.fork(static_cast<std::uint64_t>(uid) + 1);
    UserRecord user;
    user.user = uid;
    user.label = urng.bernoulli(config.low_credit_fraction) ? 1 : 0;
    const double direction = user.label == 1 ? 1.0 : -1.0;
    const double tilt = direction * kAnchorTilt * config.signal_strength;
    const RegionIndex home = sample_anchor(grid, out.propensity, tilt, 0, -1, urng);
    const RegionIndex work = sample_anchor(grid, out.propensity, tilt, home, kWorkRadius, urng);
    const RegionIndex leisure = sample_anchor(grid, out.propensity, tilt, home, kLeisureRadius, urng);

    const double volume_shift = user.label == 1 ? config.manual_feature_signal : 0.0;
    const double record_rate = urng.uniform(0.3, 0.55) + 0.15 * volume_shift;
    const double wander = urng.uniform(0.05, 0.2) + 0.2 * volume_shift;

    for (int day = 0; day < config.days; ++day) {
      const bool observed = urng.bernoulli(kDayObserved);
      const bool weekend = is_weekend(day);
      const bool out_today = urng.bernoulli(weekend ? kWeekendOut : kEveningOut);
      Trajectory t{uid, day, {}};
      RegionIndex pos = home;
      for (int slot = 0; slot < kSlotsPerDay; ++slot) {
        if (!urng.bernoulli(record_rate)) continue;
        RegionIndex target = home;
        if (!weekend && slot >= 9 && slot <= 17) {
          target = work;
        } else if (!weekend && slot >= 18 && slot <= 21 && out_today) {
          target = leisure;
        } else if (weekend && slot >= 10 && slot <= 20 && out_today) {
          target = leisure;
        }
        if (t.visits.empty()) {
          pos = target;
        } else if (pos != target) {
          pos = step_toward(grid, pos, target);
        } else if (urng.bernoulli(wander)) {
          pos = random_neighbor(grid, pos, urng);
        }
        t.visits.push_back(Visit{slot, pos});
      }
      if (observed && !t.visits.empty()) user.trajectories.push_back(std::move(t));
    }
    if (user.trajectories.empty()) {
      // Every user keeps at least one recorded day.
      user.trajectories.push_back(Trajectory{uid, 0, {Visit{12, home}}});
    }
    out.dataset.users.push_back(std::move(user));
  }
  return out;
}

void write_synthetic(const SynthResult& result, const SynthConfig& config, const std::filesystem::path& dir) {
  save_dataset(result.dataset, dir);
  nlohmann::ordered_json meta;
  meta["config"] = {{"seed", config.seed},
                    {"users", config.users},
                    {"low_credit_fraction", config.low_credit_fraction},
                    {"grid_rows", config.grid_rows},
                    {"grid_cols", config.grid_cols},
                    {"cell_km", config.cell_km},
                    {"days", config.days},
                    {"beta", config.signal_strength},
                    {"manual_signal", config.manual_feature_signal}};
  meta["propensity"] = result.propensity;
  write_text_file(dir / kSynthMetaFile, meta.dump(2) + "\n");
}

}  // namespace creditprint
