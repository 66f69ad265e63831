#include "creditprint/optim.hpp"

#include <algorithm>
#include <cmath>

#include "creditprint/errors.hpp"

namespace creditprint {

void adam_update(AdamState& state, std::span<Matrix* const> params, std::span<const Matrix* const> grads) {
  if (params.size() != grads.size()) {
    throw DimensionError("adam_update: " + std::to_string(params.size()) + " params but " +
                         std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(*grads[i])) {
      throw DimensionError("adam_update: parameter " + std::to_string(i) + " is " + params[i]->shape_str() +
                           " but its gradient is " + grads[i]->shape_str());
    }
  }
  if (state.first_moment.empty()) {
    for (const Matrix* p : params) {
      state.first_moment.emplace_back(p->rows(), p->cols());
      state.second_moment.emplace_back(p->rows(), p->cols());
    }
  }
  if (state.first_moment.size() != params.size()) throw DimensionError("adam_update: parameter list changed");

  ++state.step_count;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grads[i]->data();
    auto m = state.first_moment[i].data();
    auto v = state.second_moment[i].data();
    if (m.size() != p.size()) throw DimensionError("adam_update: moment shape changed for parameter " + std::to_string(i));
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

Adam::Adam(std::vector<ad::Var> params, AdamConfig config) : params_(std::move(params)) { state_.config = config; }

void Adam::step() {
  std::vector<Matrix*> values;
  std::vector<const Matrix*> grads;
  for (auto& p : params_) {
    values.push_back(&p->value);
    grads.push_back(&p->ensure_grad());
  }
  adam_update(state_, values, grads);
}

void Adam::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

Matrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(-bound, bound);
  return m;
}

GradCheckReport finite_diff_check(const std::function<ad::Var()>& loss, std::span<const ad::Var> params,
                                  double step, double tol) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_check: step must be positive");
  for (const auto& p : params) p->zero_grad();
  ad::backward(loss());
  std::vector<Matrix> analytic;
  for (const auto& p : params) analytic.push_back(p->ensure_grad());

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k]->value.data();
    double worst = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = loss()->value[0];
      values[i] = saved - step;
      const double down = loss()->value[0];
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
    report.max_rel_error.push_back(worst);
    report.worst = std::max(report.worst, worst);
  }
  for (const auto& p : params) p->zero_grad();
  report.passed = report.worst <= tol;
  return report;
}

std::vector<Matrix> snapshot(std::span<const ad::Var> params) {
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p->value);
  return out;
}

void restore(std::span<const ad::Var> params, const std::vector<Matrix>& values) {
  if (values.size() != params.size()) throw DimensionError("restore: snapshot size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->value.same_shape(values[i])) throw DimensionError("restore: shape mismatch");
    params[i]->value = values[i];
  }
}

}  // namespace creditprint
