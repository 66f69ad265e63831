#include "creditprint/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "creditprint/errors.hpp"

namespace creditprint::ad {

Matrix& Node::ensure_grad() {
  if (!grad.same_shape(value) || grad.empty() != value.empty()) grad = Matrix(value.rows(), value.cols());
  return grad;
}

void Node::zero_grad() {
  if (grad.same_shape(value)) {
    grad.fill(0.0);
  } else {
    grad = Matrix(value.rows(), value.cols());
  }
}

namespace {

Var make(Matrix value, std::vector<Var> parents, std::string_view op, Node::BackwardFn fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  n->requires_grad = std::any_of(parents.begin(), parents.end(), [](const Var& p) { return p->requires_grad; });
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(fn);
  }
  return n;
}

[[noreturn]] void mismatch(std::string_view op, const Matrix& a, const Matrix& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " + b.shape_str());
}

void require_same(std::string_view op, const Var& a, const Var& b) {
  if (!a->value.same_shape(b->value)) mismatch(op, a->value, b->value);
}

void check_offsets(std::string_view op, std::span<const std::size_t> offsets, std::size_t rows) {
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != rows) {
    throw DimensionError(std::string(op) + ": segment offsets must run from 0 to " + std::to_string(rows));
  }
  for (std::size_t i = 1; i < offsets.size(); ++i) {
    if (offsets[i] < offsets[i - 1]) throw DimensionError(std::string(op) + ": segment offsets must be sorted");
  }
}

template <typename F>
Matrix map(const Matrix& x, F f) {
  Matrix out(x.rows(), x.cols());
  auto in = x.data();
  auto o = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = f(in[i]);
  return out;
}

double stable_sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double stable_softplus(double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

}  // namespace

Var constant(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = "constant";
  return n;
}

Var parameter(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = "parameter";
  n->requires_grad = true;
  n->ensure_grad();
  return n;
}

void backward(const Var& loss) {
  if (loss->value.rows() != 1 || loss->value.cols() != 1) {
    throw DimensionError("backward: loss must be 1x1, got " + loss->value.shape_str());
  }
  if (!loss->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.get(), 0}};
  seen.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (n->backward_fn) n->zero_grad();  // intermediates start fresh; leaves accumulate
  }
  loss->ensure_grad()(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

Var matmul(const Var& a, const Var& b) {
  if (a->value.cols() != b->value.rows()) mismatch("matmul", a->value, b->value);
  return make(creditprint::matmul(a->value, b->value), {a, b}, "matmul", [](Node& self) {
    auto& a = self.parents[0];
    auto& b = self.parents[1];
    if (a->requires_grad) a->ensure_grad() += matmul_nt(self.grad, b->value);
    if (b->requires_grad) b->ensure_grad() += matmul_tn(a->value, self.grad);
  });
}

Var add(const Var& a, const Var& b) {
  require_same("add", a, b);
  Matrix out = a->value;
  out += b->value;
  return make(std::move(out), {a, b}, "add", [](Node& self) {
    for (auto& p : self.parents)
      if (p->requires_grad) p->ensure_grad() += self.grad;
  });
}

Var sub(const Var& a, const Var& b) {
  require_same("sub", a, b);
  Matrix out = a->value;
  auto o = out.data();
  auto bv = b->value.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return make(std::move(out), {a, b}, "sub", [](Node& self) {
    auto& a = self.parents[0];
    auto& b = self.parents[1];
    if (a->requires_grad) a->ensure_grad() += self.grad;
    if (b->requires_grad) {
      auto g = b->ensure_grad().data();
      auto sg = self.grad.data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= sg[i];
    }
  });
}

Var hadamard(const Var& a, const Var& b) {
  require_same("hadamard", a, b);
  Matrix out = a->value;
  auto o = out.data();
  auto bv = b->value.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return make(std::move(out), {a, b}, "hadamard", [](Node& self) {
    auto& a = self.parents[0];
    auto& b = self.parents[1];
    auto sg = self.grad.data();
    if (a->requires_grad) {
      auto g = a->ensure_grad().data();
      auto bv = b->value.data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sg[i] * bv[i];
    }
    if (b->requires_grad) {
      auto g = b->ensure_grad().data();
      auto av = a->value.data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sg[i] * av[i];
    }
  });
}

Var scale(const Var& x, double factor) {
  return make(map(x->value, [factor](double v) { return v * factor; }), {x}, "scale", [factor](Node& self) {
    auto g = self.parents[0]->ensure_grad().data();
    auto sg = self.grad.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * sg[i];
  });
}

Var add_scalar(const Var& x, double offset) {
  return make(map(x->value, [offset](double v) { return v + offset; }), {x}, "add_scalar",
              [](Node& self) { self.parents[0]->ensure_grad() += self.grad; });
}

Var add_row_broadcast(const Var& x, const Var& row) {
  if (row->value.rows() != 1 || row->value.cols() != x->value.cols()) mismatch("add_row_broadcast", x->value, row->value);
  Matrix out = x->value;
  const std::size_t k = out.cols();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto dst = out.row(r);
    for (std::size_t c = 0; c < k; ++c) dst[c] += row->value[c];
  }
  return make(std::move(out), {x, row}, "add_row_broadcast", [](Node& self) {
    auto& x = self.parents[0];
    auto& row = self.parents[1];
    if (x->requires_grad) x->ensure_grad() += self.grad;
    if (row->requires_grad) {
      auto& g = row->ensure_grad();
      for (std::size_t r = 0; r < self.grad.rows(); ++r) {
        auto src = self.grad.row(r);
        for (std::size_t c = 0; c < src.size(); ++c) g[c] += src[c];
      }
    }
  });
}

Var scale_rows(const Var& x, const Var& w) {
  if (w->value.cols() != 1 || w->value.rows() != x->value.rows()) mismatch("scale_rows", x->value, w->value);
  Matrix out = x->value;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    const double s = w->value[r];
    for (double& v : out.row(r)) v *= s;
  }
  return make(std::move(out), {x, w}, "scale_rows", [](Node& self) {
    auto& x = self.parents[0];
    auto& w = self.parents[1];
    if (x->requires_grad) {
      auto& g = x->ensure_grad();
      for (std::size_t r = 0; r < g.rows(); ++r) {
        const double s = w->value[r];
        auto dst = g.row(r);
        auto src = self.grad.row(r);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += s * src[c];
      }
    }
    if (w->requires_grad) {
      auto& g = w->ensure_grad();
      for (std::size_t r = 0; r < g.rows(); ++r) {
        auto xv = x->value.row(r);
        auto src = self.grad.row(r);
        double acc = 0.0;
        for (std::size_t c = 0; c < xv.size(); ++c) acc += xv[c] * src[c];
        g[r] += acc;
      }
    }
  });
}

Var sigmoid(const Var& x) {
  return make(map(x->value, stable_sigmoid), {x}, "sigmoid", [](Node& self) {
    auto g = self.parents[0]->ensure_grad().data();
    auto y = self.value.data();
    auto sg = self.grad.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += sg[i] * y[i] * (1.0 - y[i]);
  });
}

Var tanh(const Var& x) {
  return make(map(x->value, [](double v) { return std::tanh(v); }), {x}, "tanh", [](Node& self) {
    auto g = self.parents[0]->ensure_grad().data();
    auto y = self.value.data();
    auto sg = self.grad.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += sg[i] * (1.0 - y[i] * y[i]);
  });
}

Var relu(const Var& x) {
  return make(map(x->value, [](double v) { return v > 0.0 ? v : 0.0; }), {x}, "relu", [](Node& self) {
    auto g = self.parents[0]->ensure_grad().data();
    auto xv = self.parents[0]->value.data();
    auto sg = self.grad.data();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] > 0.0) g[i] += sg[i];
  });
}

Var softplus(const Var& x) {
  return make(map(x->value, stable_softplus), {x}, "softplus", [](Node& self) {
    auto g = self.parents[0]->ensure_grad().data();
    auto xv = self.parents[0]->value.data();
    auto sg = self.grad.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += sg[i] * stable_sigmoid(xv[i]);
  });
}

namespace {

// Shared softmax backward over the half-open range [begin, end) of a flat vector.
void softmax_backward_range(std::span<double> g, std::span<const double> y, std::span<const double> sg,
                            std::size_t begin, std::size_t end) {
  double dot = 0.0;
  for (std::size_t i = begin; i < end; ++i) dot += sg[i] * y[i];
  for (std::size_t i = begin; i < end; ++i) g[i] += y[i] * (sg[i] - dot);
}

void softmax_forward_range(std::span<const double> x, std::span<double> y, std::size_t begin, std::size_t end) {
  if (begin == end) return;
  double mx = x[begin];
  for (std::size_t i = begin + 1; i < end; ++i) mx = std::max(mx, x[i]);
  double total = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    y[i] = std::exp(x[i] - mx);
    total += y[i];
  }
  for (std::size_t i = begin; i < end; ++i) y[i] /= total;
}

}  // namespace

Var softmax_vector(const Var& x) {
  if (!x->value.is_vector()) throw DimensionError("softmax_vector: expected a vector, got " + x->value.shape_str());
  if (x->value.empty()) throw DimensionError("softmax_vector: empty vector");
  Matrix out(x->value.rows(), x->value.cols());
  softmax_forward_range(x->value.data(), out.data(), 0, out.size());
  return make(std::move(out), {x}, "softmax_vector", [](Node& self) {
    softmax_backward_range(self.parents[0]->ensure_grad().data(), self.value.data(), self.grad.data(), 0,
                           self.value.size());
  });
}

Var segment_softmax(const Var& x, std::span<const std::size_t> offsets) {
  if (x->value.cols() != 1) throw DimensionError("segment_softmax: expected a column, got " + x->value.shape_str());
  check_offsets("segment_softmax", offsets, x->value.rows());
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  Matrix out(x->value.rows(), 1);
  for (std::size_t s = 0; s + 1 < off.size(); ++s) softmax_forward_range(x->value.data(), out.data(), off[s], off[s + 1]);
  return make(std::move(out), {x}, "segment_softmax", [off = std::move(off)](Node& self) {
    auto g = self.parents[0]->ensure_grad().data();
    for (std::size_t s = 0; s + 1 < off.size(); ++s)
      softmax_backward_range(g, self.value.data(), self.grad.data(), off[s], off[s + 1]);
  });
}

Var segment_sum(const Var& x, std::span<const std::size_t> offsets) {
  check_offsets("segment_sum", offsets, x->value.rows());
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  const std::size_t k = x->value.cols();
  Matrix out(off.size() - 1, k);
  for (std::size_t s = 0; s + 1 < off.size(); ++s) {
    auto dst = out.row(s);
    for (std::size_t r = off[s]; r < off[s + 1]; ++r) {
      auto src = x->value.row(r);
      for (std::size_t c = 0; c < k; ++c) dst[c] += src[c];
    }
  }
  return make(std::move(out), {x}, "segment_sum", [off = std::move(off)](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t s = 0; s + 1 < off.size(); ++s) {
      auto src = self.grad.row(s);
      for (std::size_t r = off[s]; r < off[s + 1]; ++r) {
        auto dst = g.row(r);
        for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
      }
    }
  });
}

Var concat_rows(const Var& a, const Var& b) {
  if (a->value.rows() != b->value.rows()) mismatch("concat_rows", a->value, b->value);
  const std::size_t ka = a->value.cols();
  const std::size_t kb = b->value.cols();
  Matrix out(a->value.rows(), ka + kb);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto dst = out.row(r);
    std::copy_n(a->value.row(r).begin(), ka, dst.begin());
    std::copy_n(b->value.row(r).begin(), kb, dst.begin() + static_cast<std::ptrdiff_t>(ka));
  }
  return make(std::move(out), {a, b}, "concat_rows", [ka, kb](Node& self) {
    auto& a = self.parents[0];
    auto& b = self.parents[1];
    for (std::size_t r = 0; r < self.grad.rows(); ++r) {
      auto src = self.grad.row(r);
      if (a->requires_grad) {
        auto dst = a->ensure_grad().row(r);
        for (std::size_t c = 0; c < ka; ++c) dst[c] += src[c];
      }
      if (b->requires_grad) {
        auto dst = b->ensure_grad().row(r);
        for (std::size_t c = 0; c < kb; ++c) dst[c] += src[ka + c];
      }
    }
  });
}

Var vstack(const Var& a, const Var& b) {
  if (a->value.cols() != b->value.cols()) mismatch("vstack", a->value, b->value);
  const std::size_t na = a->value.size();
  std::vector<double> data;
  data.reserve(na + b->value.size());
  data.insert(data.end(), a->value.data().begin(), a->value.data().end());
  data.insert(data.end(), b->value.data().begin(), b->value.data().end());
  Matrix out(a->value.rows() + b->value.rows(), a->value.cols(), std::move(data));
  return make(std::move(out), {a, b}, "vstack", [na](Node& self) {
    auto& a = self.parents[0];
    auto& b = self.parents[1];
    auto sg = self.grad.data();
    if (a->requires_grad) {
      auto g = a->ensure_grad().data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sg[i];
    }
    if (b->requires_grad) {
      auto g = b->ensure_grad().data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sg[na + i];
    }
  });
}

Var slice_rows(const Var& x, std::size_t begin, std::size_t count) {
  if (begin + count > x->value.rows()) {
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + x->value.shape_str());
  }
  const std::size_t k = x->value.cols();
  auto src = x->value.data().subspan(begin * k, count * k);
  Matrix out(count, k, std::vector<double>(src.begin(), src.end()));
  return make(std::move(out), {x}, "slice_rows", [begin, k](Node& self) {
    auto g = self.parents[0]->ensure_grad().data().subspan(begin * k, self.grad.size());
    auto sg = self.grad.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += sg[i];
  });
}

Var gather_rows(const Var& x, std::span<const std::size_t> indices) {
  const std::size_t k = x->value.cols();
  Matrix out(indices.size(), k);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= x->value.rows()) {
      throw DimensionError("gather_rows: index " + std::to_string(indices[i]) + " out of range for " +
                           x->value.shape_str());
    }
    auto src = x->value.row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return make(std::move(out), {x}, "gather_rows", [idx = std::move(idx)](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto dst = g.row(idx[i]);
      auto src = self.grad.row(i);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
  });
}

Var sum(const Var& x) {
  double total = 0.0;
  for (double v : x->value.data()) total += v;
  return make(Matrix(1, 1, total), {x}, "sum", [](Node& self) {
    const double s = self.grad[0];
    for (double& g : self.parents[0]->ensure_grad().data()) g += s;
  });
}

Var mean(const Var& x) {
  if (x->value.empty()) throw DimensionError("mean: empty input");
  const double n = static_cast<double>(x->value.size());
  double total = 0.0;
  for (double v : x->value.data()) total += v;
  return make(Matrix(1, 1, total / n), {x}, "mean", [n](Node& self) {
    const double s = self.grad[0] / n;
    for (double& g : self.parents[0]->ensure_grad().data()) g += s;
  });
}

Var inner_product(const Var& a, const Var& b) {
  if (a->value.rows() != b->value.rows() || a->value.cols() != b->value.cols()) {
    mismatch("inner_product", a->value, b->value);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < a->value.size(); ++i) total += a->value[i] * b->value[i];
  return make(Matrix(1, 1, total), {a, b}, "inner_product", [](Node& self) {
    const double s = self.grad[0];
    auto& a = self.parents[0];
    auto& b = self.parents[1];
    if (a->requires_grad) {
      auto& g = a->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * b->value[i];
    }
    if (b->requires_grad) {
      auto& g = b->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * a->value[i];
    }
  });
}

Var row_dot(const Var& a, const Var& b) {
  require_same("row_dot", a, b);
  Matrix out(a->value.rows(), 1);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto av = a->value.row(r);
    auto bv = b->value.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < av.size(); ++c) acc += av[c] * bv[c];
    out[r] = acc;
  }
  return make(std::move(out), {a, b}, "row_dot", [](Node& self) {
    auto& a = self.parents[0];
    auto& b = self.parents[1];
    for (std::size_t r = 0; r < self.grad.rows(); ++r) {
      const double s = self.grad[r];
      if (a->requires_grad) {
        auto dst = a->ensure_grad().row(r);
        auto bv = b->value.row(r);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += s * bv[c];
      }
      if (b->requires_grad) {
        auto dst = b->ensure_grad().row(r);
        auto av = a->value.row(r);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += s * av[c];
      }
    }
  });
}

Var weighted_sum(const Var& x, const Matrix& weights) {
  if (!x->value.same_shape(weights)) mismatch("weighted_sum", x->value, weights);
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) total += x->value[i] * weights[i];
  return make(Matrix(1, 1, total), {x}, "weighted_sum", [weights](Node& self) {
    const double s = self.grad[0];
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * weights[i];
  });
}

Var blend(const Var& weights, std::span<const Matrix> mats) {
  if (!weights->value.is_vector() || weights->value.size() != mats.size() || mats.empty()) {
    throw DimensionError("blend: " + std::to_string(mats.size()) + " matrices but weights are " +
                         weights->value.shape_str());
  }
  for (const auto& m : mats) {
    if (!m.same_shape(mats.front())) mismatch("blend", mats.front(), m);
  }
  Matrix out(mats.front().rows(), mats.front().cols());
  for (std::size_t g = 0; g < mats.size(); ++g) {
    const double w = weights->value[g];
    auto src = mats[g].data();
    auto dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += w * src[i];
  }
  std::vector<Matrix> held(mats.begin(), mats.end());
  return make(std::move(out), {weights}, "blend", [held = std::move(held)](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    auto sg = self.grad.data();
    for (std::size_t k = 0; k < held.size(); ++k) {
      auto m = held[k].data();
      double acc = 0.0;
      for (std::size_t i = 0; i < m.size(); ++i) acc += sg[i] * m[i];
      g[k] += acc;
    }
  });
}

Var binary_cross_entropy(const Var& p, std::span<const double> labels) {
  if (p->value.cols() != 1 || p->value.rows() != labels.size() || labels.empty()) {
    throw DimensionError("binary_cross_entropy: " + std::to_string(labels.size()) + " labels for predictions " +
                         p->value.shape_str());
  }
  const double n = static_cast<double>(labels.size());
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double q = std::clamp(p->value[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    total -= labels[i] * std::log(q) + (1.0 - labels[i]) * std::log(1.0 - q);
  }
  std::vector<double> y(labels.begin(), labels.end());
  return make(Matrix(1, 1, total / n), {p}, "binary_cross_entropy", [y = std::move(y), n](Node& self) {
    const double s = self.grad[0] / n;
    auto& pv = self.parents[0]->value;
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double q = pv[i];
      if (q < kProbabilityClamp || q > 1.0 - kProbabilityClamp) continue;
      g[i] += s * (-(y[i] / q) + (1.0 - y[i]) / (1.0 - q));
    }
  });
}

}  // namespace creditprint::ad
