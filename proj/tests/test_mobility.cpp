#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "creditprint/errors.hpp"
#include "creditprint/mobility.hpp"
#include "test_util.hpp"

using namespace creditprint;

namespace {

const RegionGrid kGrid{3, 4, 1.0};

std::vector<UserRecord> make_users(std::size_t n, std::size_t positives) {
  std::vector<UserRecord> users;
  for (std::size_t i = 0; i < n; ++i) {
    UserRecord u;
    u.user = static_cast<UserId>(i);
    u.label = i < positives ? 1 : 0;
    u.trajectories.push_back(testutil::trajectory(u.user, 0, {i % 12}));
    users.push_back(u);
  }
  return users;
}

}  // namespace

TEST_CASE("region grid indexing and distances") {
  const RegionGrid g{5, 7, 2.0};
  CHECK(g.region_count() == 35);
  std::set<RegionIndex> seen;
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) {
      const auto idx = g.index(r, c);
      CHECK(g.row_of(idx) == r);
      CHECK(g.col_of(idx) == c);
      seen.insert(idx);
    }
  CHECK(seen.size() == 35);
  CHECK(*seen.rbegin() == 34);
  CHECK(g.center_distance_km(g.index(0, 0), g.index(3, 4)) == doctest::Approx(10.0));
  CHECK(g.cell_distance(g.index(0, 0), g.index(3, 4)) == 4);
  CHECK_THROWS_AS((RegionGrid{0, 3, 1.0}).validate(), DataError);
}

TEST_CASE("grid manifest round trip") {
  const RegionGrid g{12, 9, 0.25};
  CHECK(parse_grid_manifest(format_grid_manifest(g)) == g);
  CHECK(parse_grid_manifest("rows=2 cols=3 cell_km=1.5\n") == RegionGrid{2, 3, 1.5});
  CHECK_THROWS_AS(parse_grid_manifest("rows=2 cols=3"), ParseError);
  CHECK_THROWS_AS(parse_grid_manifest("rows=2 cols=x cell_km=1"), ParseError);
}

TEST_CASE("dataset parsing") {
  const std::string labels = "user_id,label\n7,1\n";
  SUBCASE("two rows make one trajectory of two visits") {
    const auto users = parse_dataset("user_id,day,slot,region_row,region_col\n7,0,8,0,1\n7,0,9,1,1\n", labels, kGrid);
    REQUIRE(users.size() == 1);
    REQUIRE(users[0].trajectories.size() == 1);
    CHECK(users[0].trajectories[0].visits == std::vector<Visit>{{8, 1}, {9, 5}});
    CHECK(users[0].label == 1);
  }
  SUBCASE("slots are sorted whatever the row order") {
    const std::vector<std::string> rows{"7,2,5,0,0", "7,2,1,0,1", "7,2,9,2,3", "7,2,3,1,2"};
    std::vector<std::size_t> perm{0, 1, 2, 3};
    do {
      std::string csv = "user_id,day,slot,region_row,region_col\n";
      for (auto i : perm) csv += rows[i] + "\n";
      const auto users = parse_dataset(csv, labels, kGrid);
      const auto& v = users[0].trajectories[0].visits;
      CHECK(v == std::vector<Visit>{{1, 1}, {3, 6}, {5, 0}, {9, 11}});
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  SUBCASE("errors") {
    const std::string h = "user_id,day,slot,region_row,region_col\n";
    CHECK_THROWS_AS(parse_dataset(h + "7,0,8,3,0\n", labels, kGrid), BoundsError);
    CHECK_THROWS_AS(parse_dataset(h + "7,0,8,0,4\n", labels, kGrid), BoundsError);
    CHECK_THROWS_AS(parse_dataset(h + "7,0,8,0,1\n7,0,8,1,1\n", labels, kGrid), DuplicateError);
    CHECK_THROWS_AS(parse_dataset(h + "7,0,8,0,1\n", "user_id,label\n7,1\n7,0\n", kGrid), DuplicateError);
    CHECK_THROWS_AS(parse_dataset(h + "7,0,8,0,1\n8,0,8,0,1\n", labels, kGrid), DataError);
    CHECK_THROWS_AS(parse_dataset(h + "7,0,8,0,1\n", "user_id,label\n7,1\n9,0\n", kGrid), DataError);
    CHECK_THROWS_AS(parse_dataset("user,day,slot,row,col\n", labels, kGrid), ParseError);
    try {
      parse_dataset(h + "7,0,8,0,1\n7,0,x,0,1\n", labels, kGrid);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(parse_dataset(h + "7,0,24,0,1\n", labels, kGrid), ParseError);
    CHECK_THROWS_AS(parse_dataset(h + "7,0,8,0,1\n", "user_id,label\n7,2\n", kGrid), ParseError);
  }
}

TEST_CASE("save and load round-trip exactly") {
  Dataset ds;
  ds.grid = RegionGrid{3, 4, 0.7};
  ds.users = make_users(6, 2);
  ds.users[3].trajectories.push_back(testutil::trajectory(3, 4, {1, 2, 6}, 20));
  const auto dir = std::filesystem::temp_directory_path() / "creditprint_mobility_roundtrip";
  std::filesystem::remove_all(dir);
  save_dataset(ds, dir);
  CHECK(load_dataset_dir(dir) == ds);
  std::filesystem::remove_all(dir);
}

TEST_CASE("stratified split") {
  SUBCASE("100 users give 80/10/10") {
    const auto s = split_users(make_users(100, 30), {}, 4);
    CHECK(s.train.size() == 80);
    CHECK(s.validation.size() == 10);
    CHECK(s.test.size() == 10);
  }
  SUBCASE("55 users round to 44 and 5 or 6") {
    const auto s = split_users(make_users(55, 17), {}, 4);
    CHECK(s.train.size() == 44);
    CHECK(s.validation.size() + s.test.size() == 11);
    CHECK(std::max(s.validation.size(), s.test.size()) == 6);
  }
  SUBCASE("partition, determinism and prevalence") {
    const auto users = make_users(500, 150);
    const auto a = split_users(users, {}, 9);
    const auto b = split_users(users, {}, 9);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    CHECK(a.hash() == b.hash());
    CHECK(split_users(users, {}, 10).hash() != a.hash());
    std::set<UserId> all;
    for (const auto* part : {&a.train, &a.validation, &a.test})
      for (auto id : *part) CHECK(all.insert(id).second);
    CHECK(all.size() == 500);
    auto prevalence = [&](const std::vector<UserId>& ids) {
      double pos = 0;
      for (auto id : ids) pos += users[static_cast<std::size_t>(id)].label;
      return pos / static_cast<double>(ids.size());
    };
    for (const auto* part : {&a.train, &a.validation, &a.test}) CHECK(std::abs(prevalence(*part) - 0.3) <= 0.05);
  }
  CHECK_THROWS_AS(split_users(make_users(9, 3), {}, 1), DataError);
}

TEST_CASE("context features") {
  Trajectory t;
  t.day = 0;
  const auto monday = context_features(t);
  CHECK(std::vector<double>(monday.begin(), monday.end()) == std::vector<double>{1, 0, 0, 0, 0, 0, 0, 1, 0});
  t.day = 5;
  const auto saturday = context_features(t);
  CHECK(saturday[5] == 1.0);
  CHECK(saturday[8] == 1.0);
  for (int day = 0; day < 30; ++day) {
    t.day = day;
    const auto c = context_features(t);
    double total = 0;
    for (double v : c) total += v;
    CHECK(total == 2.0);
  }
}

TEST_CASE("file helpers report the path on failure") {
  CHECK_THROWS_AS(read_text_file("/nonexistent/creditprint/file.txt"), IoError);
  CHECK_THROWS_AS(write_text_file("/proc/creditprint_forbidden/x.txt", "x"), IoError);
}
