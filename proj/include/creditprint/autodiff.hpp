#pragma once

// Define-by-run reverse-mode differentiation over dense matrices.
//
// Every operation returns a new Node holding its value. Nodes that depend on
// a trainable leaf keep their parents and a backward closure; nodes built only
// from constants drop both, so inference graphs cost no extra memory.
// backward() walks the graph in reverse topological order and accumulates
// gradients additively, so fan-out is handled by summation.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "creditprint/matrix.hpp"

namespace creditprint::ad {

class Node;
using Var = std::shared_ptr<Node>;

class Node {
 public:
  using BackwardFn = std::function<void(Node&)>;

  Matrix value;
  Matrix grad;  // same shape as value once allocated
  std::vector<Var> parents;
  BackwardFn backward_fn;
  std::string_view op = "leaf";
  bool requires_grad = false;

  // Allocates a zero gradient of the value's shape if none exists yet.
  Matrix& ensure_grad();
  void zero_grad();
};

Var constant(Matrix value);
// Trainable leaf. Its gradient persists across backward calls until zeroed.
Var parameter(Matrix value);

// Runs reverse accumulation from a 1x1 loss. Throws DimensionError otherwise.
void backward(const Var& loss);

// --- primitives ---------------------------------------------------------

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& x, double factor);
Var add_scalar(const Var& x, double offset);
// x (n×k) plus a 1×k row added to every row.
Var add_row_broadcast(const Var& x, const Var& row);
// Multiplies row i of x (n×k) by w(i,0), w being n×1.
Var scale_rows(const Var& x, const Var& w);

Var sigmoid(const Var& x);
Var tanh(const Var& x);
Var relu(const Var& x);
// log(1 + exp(x)), evaluated without overflow.
Var softplus(const Var& x);

// Softmax over all entries of a 1×n or n×1 vector; keeps the input's shape.
Var softmax_vector(const Var& x);
// Softmax of an n×1 column taken independently within each contiguous segment.
// `offsets` has one entry per segment plus a final end marker.
Var segment_softmax(const Var& x, std::span<const std::size_t> offsets);
// Sums the rows of x within each segment: result is (segments × k).
Var segment_sum(const Var& x, std::span<const std::size_t> offsets);

// Row-wise concatenation: row i of the result is [row i of a | row i of b].
Var concat_rows(const Var& a, const Var& b);
// Vertical stacking: rows of a followed by rows of b.
Var vstack(const Var& a, const Var& b);
Var slice_rows(const Var& x, std::size_t begin, std::size_t count);
Var gather_rows(const Var& x, std::span<const std::size_t> indices);

Var sum(const Var& x);
Var mean(const Var& x);
// Sum of elementwise products of two equally shaped matrices, as 1×1.
Var inner_product(const Var& a, const Var& b);
// Per-row inner products of two n×k matrices, as n×1.
Var row_dot(const Var& a, const Var& b);
// Σ_i x_i·w_i with constant weights w of x's shape.
Var weighted_sum(const Var& x, const Matrix& weights);

// Σ_g w_g·mats[g], with w a 1×M (or M×1) node and mats constant.
Var blend(const Var& weights, std::span<const Matrix> mats);

// Mean negated Bernoulli log-likelihood of probabilities p (n×1) against 0/1
// labels. Probabilities are clamped to [1e-12, 1 - 1e-12]; clamped entries
// pass no gradient.
Var binary_cross_entropy(const Var& p, std::span<const double> labels);

inline constexpr double kProbabilityClamp = 1e-12;

}  // namespace creditprint::ad
