#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "creditprint/autodiff.hpp"
#include "creditprint/matrix.hpp"
#include "creditprint/rng.hpp"

namespace creditprint {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::uint64_t step_count = 0;
};

// One bias-corrected Adam step, mutating params in place. Moments are created
// on the first call. Zeroing the gradients afterwards is the caller's job.
void adam_update(AdamState& state, std::span<Matrix* const> params, std::span<const Matrix* const> grads);

// Adam bound to a fixed list of trainable nodes.
class Adam {
 public:
  Adam(std::vector<ad::Var> params, AdamConfig config = {});

  void step();
  void zero_grad();
  const AdamState& state() const noexcept { return state_; }

 private:
  std::vector<ad::Var> params_;
  AdamState state_;
};

// Uniform in ±sqrt(6 / (fan_in + fan_out)).
Matrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng);

struct GradCheckReport {
  std::vector<double> max_rel_error;  // one per parameter
  double worst = 0.0;
  bool passed = false;
};

// Compares analytic gradients of `loss` with central differences. `loss` must
// rebuild the graph from the current parameter values on every call. Relative
// error per entry is |a - n| / max(|a|, |n|, 1e-6).
GradCheckReport finite_diff_check(const std::function<ad::Var()>& loss, std::span<const ad::Var> params,
                                  double step = 1e-3, double tol = 1e-4);

// Parameter value snapshots, for early-stopping restore.
std::vector<Matrix> snapshot(std::span<const ad::Var> params);
void restore(std::span<const ad::Var> params, const std::vector<Matrix>& values);

}  // namespace creditprint
