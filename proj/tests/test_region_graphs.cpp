#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "creditprint/errors.hpp"
#include "creditprint/region_graphs.hpp"
#include "creditprint/rng.hpp"
#include "test_util.hpp"

using namespace creditprint;
using testutil::trajectory;

namespace {

UserRecord user(UserId id, int label, std::vector<Trajectory> trajectories) {
  UserRecord u;
  u.user = id;
  u.label = label;
  u.trajectories = std::move(trajectories);
  for (auto& t : u.trajectories) t.user = id;
  return u;
}

// Region r of a 1×n grid gets ten distinct visitors, low[r] of them low-credit.
std::vector<UserRecord> users_with_low_counts(const std::vector<int>& low) {
  std::vector<UserRecord> users;
  for (std::size_t r = 0; r < low.size(); ++r)
    for (int i = 0; i < 10; ++i) {
      const auto id = static_cast<UserId>(r * 10 + static_cast<std::size_t>(i));
      users.push_back(user(id, i < low[r] ? 1 : 0, {trajectory(id, 0, {r})}));
    }
  return users;
}

Matrix random_symmetric_adjacency(std::size_t n, Rng& rng, double density) {
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform() < density) a(i, j) = a(j, i) = rng.uniform(0.1, 5.0);
  return a;
}

std::pair<double, double> eigen_range(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(e, Eigen::EigenvaluesOnly);
  return {solver.eigenvalues().minCoeff(), solver.eigenvalues().maxCoeff()};
}

bool zero_diagonal(const Matrix& a) {
  for (std::size_t i = 0; i < a.rows(); ++i)
    if (a(i, i) != 0.0) return false;
  return true;
}

}  // namespace

TEST_CASE("region credit scores count distinct visitors") {
  SUBCASE("3 low and 7 high visitors give 0.3") {
    std::vector<UserRecord> users;
    for (int i = 0; i < 10; ++i) {
      // Repeat visits by one user must not change the ratio.
      users.push_back(user(i, i < 3 ? 1 : 0, {trajectory(i, 0, {2, 2, 2}), trajectory(i, 1, {2})}));
    }
    const auto t = region_credit_scores(users, RegionGrid{1, 4, 1.0});
    CHECK(t.visitors[2] == 10);
    CHECK(t.low_visitors[2] == 3);
    CHECK(t.score[2] == doctest::Approx(0.3));
    CHECK_FALSE(t.visited(0));
    CHECK(t.score[0] == t.global_mean);
  }
  SUBCASE("only high-credit visitors give 0") {
    const auto t = region_credit_scores({user(1, 0, {trajectory(1, 0, {0})}), user(2, 1, {trajectory(2, 0, {1})})},
                                        RegionGrid{1, 2, 1.0});
    CHECK(t.score[0] == 0.0);
    CHECK(t.score[1] == 1.0);
  }
  SUBCASE("labels use a strict median over visited regions") {
    const auto t = region_credit_scores(users_with_low_counts({1, 2, 5, 8, 9}), RegionGrid{1, 6, 1.0});
    CHECK(t.median == doctest::Approx(0.5));
    CHECK(std::vector<int>(t.label.begin(), t.label.begin() + 5) == std::vector<int>{0, 0, 0, 1, 1});
    CHECK(t.label[5] == 0);
    CHECK(t.visited_regions() == std::vector<RegionIndex>{0, 1, 2, 3, 4});
    CHECK(t.global_mean == doctest::Approx(0.5));
  }
  SUBCASE("hourly dynamic vectors") {
    // Low-credit user at region 0 in hour 8, high-credit user at hour 9.
    const auto t = region_credit_scores({user(1, 1, {trajectory(1, 0, {0}, 8)}), user(2, 0, {trajectory(2, 0, {0}, 9)})},
                                        RegionGrid{1, 1, 1.0});
    CHECK(t.dynamic[0][8] == 1.0);
    CHECK(t.dynamic[0][9] == 0.0);
    CHECK(t.dynamic[0][3] == 0.5);  // no visitor that hour: overall score
    for (double v : t.dynamic[0]) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  CHECK_THROWS_AS(region_credit_scores({}, RegionGrid{1, 1, 1.0}), DataError);
}

TEST_CASE("distance graph") {
  CHECK(build_distance_graph(RegionGrid{1, 1, 1.0}) == Matrix(1, 1));
  const auto two = build_distance_graph(RegionGrid{2, 2, 1.0});
  double edges = 0;
  for (double v : two.data()) edges += v;
  CHECK(edges / 2 == 6);
  const RegionGrid g{5, 5, 1.0};
  const auto a = build_distance_graph(g);
  double degree = 0;
  for (double v : a.row(g.index(2, 2))) degree += v;
  CHECK(degree == 8);
  CHECK(is_symmetric(a));
  CHECK(zero_diagonal(a));
}

TEST_CASE("interaction graph counts each trajectory once per pair") {
  CHECK(build_interaction_graph({user(1, 0, {trajectory(1, 0, {4, 9})})}, 12, 1)(4, 9) == 1.0);
  const auto repeated = build_interaction_graph({user(1, 0, {trajectory(1, 0, {4, 4, 9, 4})})}, 12, 1);
  CHECK(repeated(4, 9) == 1.0);
  CHECK(repeated(9, 4) == 1.0);
  CHECK(repeated(4, 4) == 0.0);

  std::vector<UserRecord> users;
  for (int i = 0; i < 3; ++i) users.push_back(user(i, 0, {trajectory(i, 0, {1, 2, 3}), trajectory(i, 1, {3, 5})}));
  const auto a = build_interaction_graph(users, 6, 1);
  CHECK(a(1, 2) == 3.0);
  CHECK(a(3, 5) == 3.0);
  CHECK(a(1, 5) == 0.0);
  CHECK(is_symmetric(a));
  CHECK(zero_diagonal(a));
  CHECK(build_interaction_graph(users, 6, 5) == Matrix(6, 6));
  CHECK_THROWS_AS(build_interaction_graph(users, 6, 0), ConfigError);
}

TEST_CASE("pearson correlation") {
  std::vector<double> v1(24, 0.0), v2(24, 0.0);
  v1[1] = 1.0;
  v2[0] = 1.0;
  CHECK(pearson(v1, v2) == doctest::Approx(-1.0 / 23.0).epsilon(1e-12));
  CHECK(pearson(v1, v1) == doctest::Approx(1.0));
  const std::vector<double> flat(24, 0.4);
  CHECK(std::isnan(pearson(v1, flat)));
}

TEST_CASE("correlation graph") {
  RegionCreditTable t;
  t.visitors = {10, 10, 10, 10, 2};
  t.low_visitors = {5, 5, 5, 5, 1};
  t.score = {0.5, 0.5, 0.5, 0.5, 0.5};
  t.label = {0, 0, 0, 0, 0};
  t.dynamic.assign(5, {});
  for (int h = 0; h < kSlotsPerDay; ++h) {
    const auto i = static_cast<std::size_t>(h);
    t.dynamic[0][i] = h / 24.0;
    t.dynamic[1][i] = h / 24.0;  // identical to region 0
    t.dynamic[2][i] = 0.3;       // constant
    t.dynamic[3][i] = 1.0 - h / 24.0;
    t.dynamic[4][i] = h / 24.0;  // too few visitors
  }
  const auto a = build_correlation_graph(t, 5, 0.6);
  CHECK(a(0, 1) == doctest::Approx(1.0));
  CHECK(a(1, 0) == a(0, 1));
  for (std::size_t j = 0; j < 5; ++j) {
    CHECK(a(2, j) == 0.0);
    CHECK(a(4, j) == 0.0);
  }
  CHECK(a(0, 3) == 0.0);
  CHECK(zero_diagonal(a));
}

TEST_CASE("normalized adjacency") {
  CHECK(normalize_adjacency(Matrix(3, 3)) == Matrix::identity(3));
  const auto half = normalize_adjacency(Matrix::from_rows({{0, 1}, {1, 0}}));
  for (double v : half.data()) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(normalize_adjacency(Matrix(2, 3)), DimensionError);

  // Isolated node 2 maps to its unit vector.
  const auto iso = normalize_adjacency(Matrix::from_rows({{0, 2, 0}, {2, 0, 0}, {0, 0, 0}}));
  CHECK(iso(2, 2) == 1.0);
  CHECK(iso(2, 0) == 0.0);
  CHECK(iso(0, 2) == 0.0);

  Rng rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial % 10);
    const auto a = random_symmetric_adjacency(n, rng, 0.1 + 0.02 * trial);
    for (bool self_loops : {true, false}) {
      const auto norm = normalize_adjacency(a, self_loops);
      CHECK(is_symmetric(norm, 1e-12));
      const auto [lo, hi] = eigen_range(norm);
      if (self_loops) {
        CHECK(lo >= -1.0 - 1e-12);
        CHECK(hi <= 1.0 + 1e-12);
      }
    }
  }
}

TEST_CASE("graph set from data is symmetric and order invariant") {
  const RegionGrid grid{4, 4, 1.0};
  Rng rng(5);
  std::vector<UserRecord> users;
  for (int i = 0; i < 40; ++i) {
    std::vector<Trajectory> ts;
    for (int d = 0; d < 6; ++d) {
      std::vector<RegionIndex> regions;
      for (int k = 0; k < 5; ++k) regions.push_back(rng.index(16));
      ts.push_back(trajectory(i, d, regions, 6 + d));
    }
    users.push_back(user(i, i % 3 == 0 ? 1 : 0, ts));
  }
  GraphConfig config;
  config.min_visits = 2;
  config.rho_threshold = 0.3;
  const auto table = region_credit_scores(users, grid);
  const auto set = build_region_graphs(users, grid, table, config);
  REQUIRE(set.adjacency.size() == 3);
  for (std::size_t g = 0; g < 3; ++g) {
    CHECK(is_symmetric(set.adjacency[g]));
    CHECK(zero_diagonal(set.adjacency[g]));
    CHECK(is_symmetric(set.normalized[g], 1e-12));
  }

  auto shuffled = users;
  for (auto& u : shuffled) std::reverse(u.trajectories.begin(), u.trajectories.end());
  std::reverse(shuffled.begin(), shuffled.end());
  const auto table2 = region_credit_scores(shuffled, grid);
  const auto set2 = build_region_graphs(shuffled, grid, table2, config);
  CHECK(table2.score == table.score);
  CHECK(set2.adjacency == set.adjacency);
  CHECK(graphs_to_json(set2, table2) == graphs_to_json(set, table));

  const auto j = nlohmann::json::parse(graphs_to_json(set, table));
  CHECK(j["graphs"].contains("distance"));
}
