#include <doctest.h>

#include <cmath>
#include <limits>

#include "creditprint/autodiff.hpp"
#include "creditprint/errors.hpp"
#include "creditprint/matrix.hpp"
#include "creditprint/optim.hpp"
#include "test_util.hpp"

using namespace creditprint;
using testutil::grad_check;
using testutil::random_matrix;

TEST_CASE("matmul matches hand products and rejects bad shapes") {
  const auto a = Matrix::from_rows({{1, 2}, {3, 4}, {5, 6}});
  const auto b = Matrix::from_rows({{1, 0, 2}, {0, 1, 3}});
  CHECK(matmul(a, b) == Matrix::from_rows({{1, 2, 8}, {3, 4, 18}, {5, 6, 28}}));
  CHECK(matmul_tn(a, a) == matmul(transpose(a), a));
  CHECK(matmul_nt(a, a) == matmul(a, transpose(a)));
  CHECK_THROWS_AS(matmul(a, a), DimensionError);
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), DimensionError);
}

TEST_CASE("constants carry no graph and parameters accumulate gradients") {
  auto w = ad::parameter(Matrix::from_rows({{2.0}}));
  auto c = ad::constant(Matrix::from_rows({{3.0}}));
  auto y = ad::matmul(c, c);
  CHECK_FALSE(y->requires_grad);
  ad::backward(ad::hadamard(w, c));
  ad::backward(ad::hadamard(w, c));
  CHECK(w->grad[0] == doctest::Approx(6.0));
  w->zero_grad();
  CHECK(w->grad[0] == 0.0);
}

TEST_CASE("backward through a shared subexpression sums both paths") {
  auto x = ad::parameter(Matrix::from_rows({{1.5, -0.5}}));
  auto s = ad::sigmoid(x);
  auto loss = ad::sum(ad::hadamard(s, s));  // Σ σ(x)²
  ad::backward(loss);
  for (std::size_t i = 0; i < 2; ++i) {
    const double sig = 1.0 / (1.0 + std::exp(-x->value[i]));
    CHECK(x->grad[i] == doctest::Approx(2.0 * sig * sig * (1.0 - sig)).epsilon(1e-12));
  }
}

TEST_CASE("elementwise and structural ops pass the finite-difference oracle") {
  Rng rng(11);
  auto a = ad::parameter(random_matrix(3, 4, rng));
  auto b = ad::parameter(random_matrix(3, 4, rng));
  auto m = ad::parameter(random_matrix(4, 2, rng));
  auto row = ad::parameter(random_matrix(1, 4, rng));
  auto col = ad::parameter(random_matrix(3, 1, rng));
  const Matrix weights = random_matrix(3, 4, rng);
  const std::vector<std::size_t> idx{2, 0, 2, 1};
  const std::vector<std::size_t> seg{0, 1, 3};

  SUBCASE("arithmetic") {
    auto r = grad_check([&] { return ad::sum(ad::hadamard(ad::sub(ad::add(a, b), ad::scale(b, 0.3)), ad::add_scalar(a, 0.7))); },
                        {a, b});
    CHECK(r.passed);
  }
  SUBCASE("matmul and broadcasting") {
    auto r = grad_check([&] { return ad::weighted_sum(ad::add_row_broadcast(a, row), weights); }, {a, row});
    CHECK(r.passed);
    auto r2 = grad_check([&] { return ad::sum(ad::tanh(ad::matmul(a, m))); }, {a, m});
    CHECK(r2.passed);
    auto r3 = grad_check([&] { return ad::weighted_sum(ad::scale_rows(a, col), weights); }, {a, col});
    CHECK(r3.passed);
  }
  SUBCASE("activations") {
    CHECK(grad_check([&] { return ad::weighted_sum(ad::sigmoid(a), weights); }, {a}).passed);
    CHECK(grad_check([&] { return ad::weighted_sum(ad::softplus(ad::scale(a, 3.0)), weights); }, {a}).passed);
    // Shifted away from the kink so that ±1e-3 steps stay on one side.
    auto kinkless = ad::parameter(Matrix::from_rows({{0.5, -0.4, 0.9}, {-0.7, 0.3, -0.2}}));
    CHECK(grad_check([&] { return ad::sum(ad::hadamard(ad::relu(kinkless), kinkless)); }, {kinkless}).passed);
  }
  SUBCASE("softmax family") {
    auto v = ad::parameter(random_matrix(5, 1, rng));
    const Matrix w5 = random_matrix(5, 1, rng);
    CHECK(grad_check([&] { return ad::weighted_sum(ad::softmax_vector(v), w5); }, {v}).passed);
    const std::vector<std::size_t> offsets{0, 2, 5};
    CHECK(grad_check([&] { return ad::weighted_sum(ad::segment_softmax(v, offsets), w5); }, {v}).passed);
    CHECK(grad_check([&] { return ad::sum(ad::tanh(ad::segment_sum(a, seg))); }, {a}).passed);
  }
  SUBCASE("reshaping") {
    CHECK(grad_check([&] { return ad::sum(ad::tanh(ad::concat_rows(a, col))); }, {a, col}).passed);
    CHECK(grad_check([&] { return ad::sum(ad::tanh(ad::vstack(a, row))); }, {a, row}).passed);
    CHECK(grad_check([&] { return ad::sum(ad::tanh(ad::slice_rows(a, 1, 2))); }, {a}).passed);
    CHECK(grad_check([&] { return ad::sum(ad::tanh(ad::gather_rows(a, idx))); }, {a}).passed);
  }
  SUBCASE("reductions") {
    CHECK(grad_check([&] { return ad::mean(ad::hadamard(a, b)); }, {a, b}).passed);
    CHECK(grad_check([&] { return ad::inner_product(a, b); }, {a, b}).passed);
    CHECK(grad_check([&] { return ad::sum(ad::tanh(ad::row_dot(a, b))); }, {a, b}).passed);
  }
  SUBCASE("blend and cross-entropy") {
    auto logits = ad::parameter(random_matrix(1, 3, rng));
    const std::vector<Matrix> mats{random_matrix(2, 2, rng), random_matrix(2, 2, rng), random_matrix(2, 2, rng)};
    const Matrix w22 = random_matrix(2, 2, rng);
    CHECK(grad_check([&] { return ad::weighted_sum(ad::blend(ad::softmax_vector(logits), mats), w22); }, {logits}).passed);
    const std::vector<double> labels{1, 0, 1};
    CHECK(grad_check([&] { return ad::binary_cross_entropy(ad::sigmoid(col), labels); }, {col}).passed);
  }
}

TEST_CASE("every primitive passes the oracle on random shapes over 20 seeds") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    CAPTURE(seed);
    Rng rng(seed);
    const std::size_t r = 1 + rng.index(6), c = 1 + rng.index(6), k = 1 + rng.index(6);
    auto a = ad::parameter(random_matrix(r, c, rng));
    auto b = ad::parameter(random_matrix(r, c, rng));
    auto m = ad::parameter(random_matrix(c, k, rng));
    auto row = ad::parameter(random_matrix(1, c, rng));
    auto col = ad::parameter(random_matrix(r, 1, rng));
    const Matrix w = random_matrix(r, c, rng);
    // Magnitudes in [0.1, 1] keep relu away from its kink.
    Matrix away(r, c);
    for (std::size_t i = 0; i < away.size(); ++i) away[i] = rng.uniform(0.1, 1.0) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
    auto kinkless = ad::parameter(away);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < r + 2; ++i) idx.push_back(rng.index(r));
    const std::vector<std::size_t> seg{0, r};
    const std::vector<double> labels = [&] {
      std::vector<double> y;
      for (std::size_t i = 0; i < r; ++i) y.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
      return y;
    }();

    CHECK(grad_check([&] { return ad::sum(ad::tanh(ad::matmul(a, m))); }, {a, m}).passed);
    CHECK(grad_check([&] { return ad::weighted_sum(ad::add(a, b), w); }, {a, b}).passed);
    CHECK(grad_check([&] { return ad::weighted_sum(ad::sub(a, b), w); }, {a, b}).passed);
    CHECK(grad_check([&] { return ad::weighted_sum(ad::hadamard(a, b), w); }, {a, b}).passed);
    CHECK(grad_check([&] { return ad::weighted_sum(ad::add_scalar(ad::scale(a, -1.7), 0.2), w); }, {a}).passed);
    CHECK(grad_check([&] { return ad::weighted_sum(ad::add_row_broadcast(a, row), w); }, {a, row}).passed);
    CHECK(grad_check([&] { return ad::weighted_sum(ad::scale_rows(a, col), w); }, {a, col}).passed);
    CHECK(grad_check([&] { return ad::weighted_sum(ad::sigmoid(a), w); }, {a}).passed);
    CHECK(grad_check([&] { return ad::weighted_sum(ad::tanh(a), w); }, {a}).passed);
    CHECK(grad_check([&] { return ad::weighted_sum(ad::relu(kinkless), w); }, {kinkless}).passed);
    CHECK(grad_check([&] { return ad::weighted_sum(ad::softplus(a), w); }, {a}).passed);
    CHECK(grad_check([&] { return ad::sum(ad::tanh(ad::softmax_vector(col))); }, {col}).passed);
    CHECK(grad_check([&] { return ad::sum(ad::tanh(ad::segment_softmax(col, seg))); }, {col}).passed);
    CHECK(grad_check([&] { return ad::sum(ad::tanh(ad::segment_sum(a, seg))); }, {a}).passed);
    CHECK(grad_check([&] { return ad::sum(ad::tanh(ad::concat_rows(a, col))); }, {a, col}).passed);
    CHECK(grad_check([&] { return ad::sum(ad::tanh(ad::vstack(a, row))); }, {a, row}).passed);
    CHECK(grad_check([&] { return ad::sum(ad::tanh(ad::slice_rows(a, 0, r))); }, {a}).passed);
    CHECK(grad_check([&] { return ad::sum(ad::tanh(ad::gather_rows(a, idx))); }, {a}).passed);
    CHECK(grad_check([&] { return ad::mean(ad::tanh(a)); }, {a}).passed);
    CHECK(grad_check([&] { return ad::inner_product(a, b); }, {a, b}).passed);
    CHECK(grad_check([&] { return ad::sum(ad::tanh(ad::row_dot(a, b))); }, {a, b}).passed);
    CHECK(grad_check([&] { return ad::binary_cross_entropy(ad::sigmoid(col), labels); }, {col}).passed);
  }
}

TEST_CASE("finite-difference checker accuracy on polynomials") {
  Rng rng(2);
  auto w = ad::parameter(random_matrix(3, 3, rng));
  const Matrix c = random_matrix(3, 3, rng);
  auto linear = finite_diff_check([&] { return ad::weighted_sum(w, c); }, std::vector<ad::Var>{w});
  CHECK(linear.worst < 1e-10);
  auto quadratic = finite_diff_check([&] { return ad::inner_product(w, w); }, std::vector<ad::Var>{w});
  CHECK(quadratic.worst < 1e-6);
}

TEST_CASE("softmax hand values and shift invariance") {
  auto v = ad::constant(Matrix::from_rows({{std::log(2.0), 0.0}}));
  const auto p = ad::softmax_vector(v)->value;
  CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  Rng rng(8);
  const Matrix x = random_matrix(1, 6, rng);
  Matrix shifted = x;
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += 123.25;
  CHECK(testutil::max_abs_diff(ad::softmax_vector(ad::constant(x))->value,
                               ad::softmax_vector(ad::constant(shifted))->value) <= 1e-12);
}

TEST_CASE("backward seeds: sum and sigmoid at zero") {
  auto w = ad::parameter(Matrix(2, 3));
  ad::backward(ad::sum(ad::sigmoid(w)));
  for (double g : w->grad.values()) CHECK(g == 0.25);
  CHECK_THROWS_AS(ad::backward(w), DimensionError);
}

TEST_CASE("Adam converges on a quadratic and ignores zero gradients") {
  auto w = ad::parameter(Matrix(1, 1));
  Adam adam({w}, AdamConfig{0.05});
  for (int i = 0; i < 500; ++i) {
    adam.zero_grad();
    auto d = ad::add_scalar(w, -3.0);
    ad::backward(ad::inner_product(d, d));
    adam.step();
  }
  CHECK(std::abs(w->value[0] - 3.0) < 1e-2);

  auto still = ad::parameter(Matrix::from_rows({{0.7}}));
  Adam idle({still});
  still->ensure_grad();
  idle.step();
  CHECK(still->value[0] == 0.7);

  AdamState state;
  Matrix p(2, 2), g(2, 3);
  Matrix* ps[] = {&p};
  const Matrix* gs[] = {&g};
  CHECK_THROWS_AS(adam_update(state, ps, gs), DimensionError);
}

TEST_CASE("softmax outputs are distributions") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto v = ad::constant(random_matrix(7, 1, rng, -30.0, 30.0));
    const auto p = ad::softmax_vector(v)->value;
    double total = 0.0;
    for (double x : p.values()) {
      CHECK(x > 0.0);
      total += x;
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
    const std::vector<std::size_t> offsets{0, 3, 4, 7};
    const auto s = ad::segment_softmax(v, offsets)->value;
    for (std::size_t k = 0; k + 1 < offsets.size(); ++k) {
      double seg = 0.0;
      for (std::size_t i = offsets[k]; i < offsets[k + 1]; ++i) seg += s[i];
      CHECK(std::abs(seg - 1.0) <= 1e-12);
    }
  }
  CHECK_THROWS_AS(ad::softmax_vector(ad::constant(Matrix(0, 1))), DimensionError);
}

TEST_CASE("logistic pieces stay finite at extreme inputs") {
  auto x = ad::constant(Matrix::from_rows({{-1000.0, 1000.0, 0.0}}));
  const auto s = ad::sigmoid(x)->value;
  CHECK(s[0] == 0.0);
  CHECK(s[1] == 1.0);
  CHECK(s[2] == 0.5);
  const auto sp = ad::softplus(x)->value;
  CHECK(sp[0] == 0.0);
  CHECK(sp[1] == 1000.0);
  CHECK(sp[2] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("cross-entropy hand values") {
  const std::vector<double> y{1, 0};
  auto p = ad::constant(Matrix::column_vector(std::vector<double>{0.8, 0.3}));
  // -(ln 0.8 + ln 0.7) / 2
  CHECK(ad::binary_cross_entropy(p, y)->value[0] == doctest::Approx(0.2899092476264711).epsilon(1e-12));
  auto half = ad::constant(Matrix(2, 1, 0.5));
  CHECK(ad::binary_cross_entropy(half, y)->value[0] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  auto certain = ad::constant(Matrix::column_vector(std::vector<double>{1.0, 0.0}));
  CHECK(ad::binary_cross_entropy(certain, y)->value[0] < 1e-11);
  auto wrong = ad::constant(Matrix::column_vector(std::vector<double>{0.0, 1.0}));
  CHECK(std::isfinite(ad::binary_cross_entropy(wrong, y)->value[0]));
}

TEST_CASE("Adam first step moves each parameter by the learning rate") {
  // With bias correction, the first update is lr · g / (|g| + eps) = ±lr.
  auto w = ad::parameter(Matrix::from_rows({{1.0, -2.0}}));
  w->ensure_grad();
  w->grad[0] = 0.5;
  w->grad[1] = -3.0;
  Adam adam({w}, AdamConfig{0.1});
  adam.step();
  CHECK(w->value[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-14));
  CHECK(w->value[1] == doctest::Approx(-2.0 + 0.1 * 3.0 / (3.0 + 1e-8)).epsilon(1e-14));
  CHECK(adam.state().step_count == 1);
}

TEST_CASE("finite-difference checker flags a wrong gradient") {
  auto w = ad::parameter(Matrix::from_rows({{0.3, -0.6}}));
  // Forward value w², but the graph reports the gradient of 3·w²/2 · 2 = 3w.
  auto loss = [&] {
    auto sq = ad::hadamard(w, w);
    return ad::add(ad::sum(sq), ad::scale(ad::sum(ad::sub(sq, ad::constant(sq->value))), 0.5));
  };
  auto r = finite_diff_check(loss, std::vector<ad::Var>{w});
  CHECK_FALSE(r.passed);
  CHECK(r.worst > 0.1);
  CHECK_THROWS(finite_diff_check(loss, std::vector<ad::Var>{w}, 0.0));
}

TEST_CASE("snapshot and restore round-trip parameter values") {
  Rng rng(3);
  auto w = ad::parameter(random_matrix(2, 3, rng));
  const std::vector<ad::Var> params{w};
  const auto saved = snapshot(params);
  w->value.fill(9.0);
  restore(params, saved);
  CHECK(w->value == saved[0]);
}
