#include <doctest.h>

#include <cmath>
#include <filesystem>

#include <json.hpp>

#include "creditprint/errors.hpp"
#include "creditprint/synth.hpp"

using namespace creditprint;

namespace {

// Mean over users of a class of the average propensity of their visits.
double class_propensity(const SynthResult& s, int label) {
  double total = 0.0;
  std::size_t users = 0;
  for (const auto& u : s.dataset.users) {
    if (u.label != label) continue;
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& t : u.trajectories)
      for (const auto& v : t.visits) {
        sum += s.propensity[v.region];
        ++n;
      }
    total += sum / static_cast<double>(n);
    ++users;
  }
  return total / static_cast<double>(users);
}

double class_visit_volume(const SynthResult& s, int label) {
  double total = 0.0;
  std::size_t users = 0;
  for (const auto& u : s.dataset.users) {
    if (u.label != label) continue;
    for (const auto& t : u.trajectories) total += static_cast<double>(t.visits.size());
    ++users;
  }
  return total / static_cast<double>(users);
}

}  // namespace

TEST_CASE("generator is a pure function of its config") {
  SynthConfig c;
  c.users = 60;
  c.seed = 17;
  const auto a = generate_synthetic(c);
  const auto b = generate_synthetic(c);
  CHECK(a.dataset == b.dataset);
  CHECK(a.propensity == b.propensity);
  c.seed = 18;
  CHECK_FALSE(generate_synthetic(c).dataset == a.dataset);

  const auto dir = std::filesystem::temp_directory_path() / "creditprint_synth_det";
  std::filesystem::remove_all(dir);
  write_synthetic(a, SynthConfig{17, 60}, dir / "one");
  write_synthetic(b, SynthConfig{17, 60}, dir / "two");
  for (const char* f : {kTrajectoryFile, kLabelFile, kGridFile, kSynthMetaFile}) {
    CHECK(read_text_file(dir / "one" / f) == read_text_file(dir / "two" / f));
  }
  const auto meta = nlohmann::json::parse(read_text_file(dir / "one" / kSynthMetaFile));
  CHECK(meta["propensity"].size() == 144);
  CHECK(load_dataset_dir(dir / "one") == a.dataset);
  std::filesystem::remove_all(dir);
}

TEST_CASE("generated data respects the data-model invariants") {
  SynthConfig c;
  c.users = 120;
  const auto s = generate_synthetic(c);
  CHECK_NOTHROW(validate_users(s.dataset.users, s.dataset.grid));
  for (double p : s.propensity) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
  for (const auto& u : s.dataset.users) {
    CHECK_FALSE(u.trajectories.empty());
    for (const auto& t : u.trajectories)
      for (std::size_t i = 1; i < t.visits.size(); ++i) {
        CHECK(t.visits[i - 1].slot < t.visits[i].slot);
        CHECK(s.dataset.grid.cell_distance(t.visits[i - 1].region, t.visits[i].region) <= 1);
      }
  }
}

TEST_CASE("visit volume follows the generator accounting") {
  // Expected visits per user: days × P(day observed) × 24 slots × E[record rate]
  // = 28 × 0.9 × 24 × 0.425 = 257.04.
  const auto s = generate_synthetic(SynthConfig{});
  double visits = 0;
  for (const auto& u : s.dataset.users)
    for (const auto& t : u.trajectories) visits += static_cast<double>(t.visits.size());
  const double expected = 500 * 257.04;
  CHECK(std::abs(visits - expected) / expected < 0.05);
}

TEST_CASE("signal sits in where users go, not how much they move") {
  SynthConfig c;
  c.users = 2000;
  c.seed = 3;
  c.signal_strength = 1.0;
  const auto planted = generate_synthetic(c);
  CHECK(class_propensity(planted, 1) - class_propensity(planted, 0) > 0.1);
  const double v1 = class_visit_volume(planted, 1), v0 = class_visit_volume(planted, 0);
  CHECK(std::abs(v1 - v0) / v0 < 0.05);

  c.signal_strength = 0.0;
  const auto null = generate_synthetic(c);
  CHECK(std::abs(class_propensity(null, 1) - class_propensity(null, 0)) < 0.02);

  c.manual_feature_signal = 1.0;
  const auto volume = generate_synthetic(c);
  CHECK(class_visit_volume(volume, 1) > 1.2 * class_visit_volume(volume, 0));
}

TEST_CASE("config validation names the offending key") {
  SynthConfig c;
  c.low_credit_fraction = 1.5;
  try {
    c.validate();
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "synth.low_credit_fraction");
  }
  c = SynthConfig{};
  c.signal_strength = -0.1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SynthConfig{};
  c.users = 0;
  CHECK_THROWS_AS(generate_synthetic(c), ConfigError);
}
