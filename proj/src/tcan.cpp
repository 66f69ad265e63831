#include "creditprint/tcan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "creditprint/auc.hpp"
#include "creditprint/checkpoint.hpp"
#include "creditprint/errors.hpp"
#include "creditprint/format.hpp"
#include "creditprint/optim.hpp"

namespace creditprint {

std::string to_string(TrajectoryEncoder e) {
  return e == TrajectoryEncoder::attention_gru ? "attention_gru" : "mean_region";
}

TrajectoryEncoder trajectory_encoder_from_string(const std::string& name) {
  if (name == "attention_gru") return TrajectoryEncoder::attention_gru;
  if (name == "mean_region") return TrajectoryEncoder::mean_region;
  throw DataError("unknown trajectory encoder '" + name + "'");
}

GruParams GruParams::create(std::size_t input_dim, std::size_t hidden, Rng& rng) {
  GruParams p;
  p.w_update = ad::parameter(glorot_uniform(input_dim, hidden, rng));
  p.w_reset = ad::parameter(glorot_uniform(input_dim, hidden, rng));
  p.w_candidate = ad::parameter(glorot_uniform(input_dim, hidden, rng));
  p.u_update = ad::parameter(glorot_uniform(hidden, hidden, rng));
  p.u_reset = ad::parameter(glorot_uniform(hidden, hidden, rng));
  p.u_candidate = ad::parameter(glorot_uniform(hidden, hidden, rng));
  p.b_update = ad::parameter(Matrix(1, hidden));
  p.b_reset = ad::parameter(Matrix(1, hidden));
  p.b_candidate = ad::parameter(Matrix(1, hidden));
  return p;
}

std::vector<ad::Var> GruParams::parameters() const {
  return {w_update, w_reset, w_candidate, u_update, u_reset, u_candidate, b_update, b_reset, b_candidate};
}

GruStep gru_step(const GruParams& p, const ad::Var& x, const ad::Var& z_prev) {
  if (x->value.cols() != p.input_dim() || z_prev->value.cols() != p.hidden() || x->value.rows() != z_prev->value.rows()) {
    throw DimensionError("gru_step: x " + x->value.shape_str() + " and z " + z_prev->value.shape_str() +
                         " do not fit input dim " + std::to_string(p.input_dim()) + ", hidden " +
                         std::to_string(p.hidden()));
  }
  GruStep s;
  s.update = ad::sigmoid(ad::add_row_broadcast(ad::add(ad::matmul(x, p.w_update), ad::matmul(z_prev, p.u_update)), p.b_update));
  s.reset = ad::sigmoid(ad::add_row_broadcast(ad::add(ad::matmul(x, p.w_reset), ad::matmul(z_prev, p.u_reset)), p.b_reset));
  s.candidate = ad::tanh(ad::add_row_broadcast(
      ad::add(ad::matmul(x, p.w_candidate), ad::matmul(ad::hadamard(z_prev, s.reset), p.u_candidate)), p.b_candidate));
  // z = (1 - q) ⊙ z_prev + q ⊙ h
  s.state = ad::add(z_prev, ad::hadamard(s.update, ad::sub(s.candidate, z_prev)));
  return s;
}

TcanModel TcanModel::create(std::size_t input_dim, std::size_t manual_dim, const TcanConfig& config) {
  if (input_dim == 0 || config.hidden == 0 || config.trajectory_dim == 0 || config.head_hidden == 0) {
    throw DimensionError("TcanModel::create: dimensions must be positive");
  }
  Rng rng(config.seed);
  TcanModel m;
  m.gamma = config.gamma;
  m.encoder = config.encoder;
  m.seed = config.seed;
  m.gru = GruParams::create(input_dim, config.hidden, rng);
  m.temporal_weight = ad::parameter(glorot_uniform(input_dim, 1, rng));
  const std::size_t encoded = config.encoder == TrajectoryEncoder::attention_gru ? config.hidden : input_dim;
  m.trajectory_weight = ad::parameter(glorot_uniform(encoded, config.trajectory_dim, rng));
  m.trajectory_bias = ad::parameter(Matrix(1, config.trajectory_dim));
  m.user_weight = ad::parameter(glorot_uniform(config.trajectory_dim + kContextDim, 1, rng));
  m.head_w1 = ad::parameter(glorot_uniform(config.trajectory_dim + manual_dim, config.head_hidden, rng));
  m.head_b1 = ad::parameter(Matrix(1, config.head_hidden));
  m.head_w2 = ad::parameter(glorot_uniform(config.head_hidden, 1, rng));
  m.head_b2 = ad::parameter(Matrix(1, 1));
  return m;
}

std::vector<ad::Var> TcanModel::parameters() const {
  std::vector<ad::Var> out;
  if (encoder == TrajectoryEncoder::attention_gru) {
    // The update gate is skipped by the attention-controlled recurrence.
    out = {gru.w_reset, gru.w_candidate, gru.u_reset, gru.u_candidate, gru.b_reset, gru.b_candidate, temporal_weight};
  }
  for (const auto& v : {trajectory_weight, trajectory_bias, user_weight, head_w1, head_b1, head_w2, head_b2}) out.push_back(v);
  return out;
}

UserSample make_user_sample(const UserRecord& user, std::vector<double> manual) {
  UserSample s;
  s.user = user.user;
  s.label = user.label;
  s.manual = std::move(manual);
  for (const auto& t : user.trajectories) {
    std::vector<RegionIndex> seq;
    seq.reserve(t.visits.size());
    for (const auto& v : t.visits) seq.push_back(v.region);
    s.trajectories.push_back(std::move(seq));
    s.contexts.push_back(context_features(t));
  }
  return s;
}

ad::Var temporal_attention(const ad::Var& temporal_weight, const ad::Var& trajectory_regions) {
  if (trajectory_regions->value.rows() == 0) throw DataError("temporal_attention: empty trajectory");
  return ad::softmax_vector(ad::matmul(trajectory_regions, temporal_weight));
}

namespace {

void check_regions(std::span<const std::vector<RegionIndex>> trajectories, const Matrix& region_repr) {
  for (const auto& t : trajectories) {
    if (t.empty()) throw DataError("trajectory without visits");
    for (RegionIndex r : t)
      if (r >= region_repr.rows()) throw DataError("region " + std::to_string(r) + " has no representation row");
  }
}

ad::Var trajectory_dense(const TcanModel& model, const ad::Var& encoded) {
  return ad::tanh(ad::add_row_broadcast(ad::matmul(encoded, model.trajectory_weight), model.trajectory_bias));
}

ad::Var encode_mean(const TcanModel& model, std::span<const std::vector<RegionIndex>> trajectories,
                    const Matrix& region_repr) {
  Matrix means(trajectories.size(), region_repr.cols());
  for (std::size_t t = 0; t < trajectories.size(); ++t) {
    auto row = means.row(t);
    for (RegionIndex r : trajectories[t]) {
      auto src = region_repr.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += src[c];
    }
    for (double& v : row) v /= static_cast<double>(trajectories[t].size());
  }
  return trajectory_dense(model, ad::constant(std::move(means)));
}

// All trajectories advance together; sorting by length lets step i touch only
// the prefix of trajectories that are still running.
ad::Var encode_gru(const TcanModel& model, std::span<const std::vector<RegionIndex>> trajectories,
                   const Matrix& region_repr, const std::vector<std::vector<double>>* forced) {
  const std::size_t n = trajectories.size();
  const GruParams& g = model.gru;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return trajectories[a].size() > trajectories[b].size(); });

  std::vector<std::size_t> offsets{0};
  std::vector<RegionIndex> flat;
  for (std::size_t t : order) {
    flat.insert(flat.end(), trajectories[t].begin(), trajectories[t].end());
    offsets.push_back(flat.size());
  }

  const auto regions = ad::constant(region_repr);
  ad::Var attention;
  if (forced) {
    if (forced->size() != n) throw DimensionError("encode_trajectories: forced attention count mismatch");
    Matrix a(flat.size(), 1);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& w = (*forced)[order[k]];
      if (w.size() != trajectories[order[k]].size()) throw DimensionError("encode_trajectories: forced attention length mismatch");
      for (std::size_t i = 0; i < w.size(); ++i) a(offsets[k] + i, 0) = w[i];
    }
    attention = ad::constant(std::move(a));
  } else {
    attention = ad::segment_softmax(ad::gather_rows(ad::matmul(regions, model.temporal_weight), flat), offsets);
  }

  const auto pre_reset = ad::add_row_broadcast(ad::matmul(regions, g.w_reset), g.b_reset);
  const auto pre_candidate = ad::add_row_broadcast(ad::matmul(regions, g.w_candidate), g.b_candidate);

  ad::Var z = ad::constant(Matrix(n, g.hidden()));
  const std::size_t steps = trajectories[order[0]].size();
  std::vector<std::size_t> step_regions, step_positions;
  for (std::size_t i = 0; i < steps; ++i) {
    std::size_t active = 0;
    while (active < n && trajectories[order[active]].size() > i) ++active;
    step_regions.clear();
    step_positions.clear();
    for (std::size_t k = 0; k < active; ++k) {
      step_regions.push_back(trajectories[order[k]][i]);
      step_positions.push_back(offsets[k] + i);
    }
    const auto z_active = active == n ? z : ad::slice_rows(z, 0, active);
    const auto reset = ad::sigmoid(ad::add(ad::gather_rows(pre_reset, step_regions), ad::matmul(z_active, g.u_reset)));
    const auto candidate = ad::tanh(
        ad::add(ad::gather_rows(pre_candidate, step_regions), ad::matmul(ad::hadamard(z_active, reset), g.u_candidate)));
    const auto a = ad::gather_rows(attention, step_positions);
    // z_i = (1 - a_i) z_{i-1} + a_i h_i
    const auto z_next = ad::add(z_active, ad::scale_rows(ad::sub(candidate, z_active), a));
    z = active == n ? z_next : ad::vstack(z_next, ad::slice_rows(z, active, n - active));
  }

  std::vector<std::size_t> unsort(n);
  for (std::size_t k = 0; k < n; ++k) unsort[order[k]] = k;
  return trajectory_dense(model, ad::gather_rows(z, unsort));
}

}  // namespace

ad::Var encode_trajectories(const TcanModel& model, std::span<const std::vector<RegionIndex>> trajectories,
                            const Matrix& region_repr, const std::vector<std::vector<double>>* forced_attention) {
  if (trajectories.empty()) throw DataError("encode_trajectories: no trajectories");
  if (region_repr.cols() != model.input_dim()) {
    throw DimensionError("encode_trajectories: region representation has " + std::to_string(region_repr.cols()) +
                         " columns, model expects " + std::to_string(model.input_dim()));
  }
  check_regions(trajectories, region_repr);
  if (model.encoder == TrajectoryEncoder::mean_region) return encode_mean(model, trajectories, region_repr);
  return encode_gru(model, trajectories, region_repr, forced_attention);
}

ad::Var trajectory_embed(const TcanModel& model, const std::vector<RegionIndex>& trajectory, const Matrix& region_repr,
                         const std::vector<double>* forced_attention) {
  std::vector<std::vector<double>> forced;
  if (forced_attention) forced.push_back(*forced_attention);
  return encode_trajectories(model, std::span(&trajectory, 1), region_repr, forced_attention ? &forced : nullptr);
}

UserEmbedding user_aggregate(const TcanModel& model, const ad::Var& trajectory_embeddings, const Matrix& contexts,
                             std::span<const std::size_t> offsets, const ad::Var& forced_scores) {
  const std::size_t n = trajectory_embeddings->value.rows();
  if (contexts.rows() != n || contexts.cols() != kContextDim) {
    throw DimensionError("user_aggregate: context matrix " + contexts.shape_str() + " for " + std::to_string(n) +
                         " trajectories");
  }
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != n) {
    throw DimensionError("user_aggregate: offsets must span all trajectories");
  }
  for (std::size_t u = 0; u + 1 < offsets.size(); ++u)
    if (offsets[u + 1] <= offsets[u]) throw DataError("user_aggregate: user without trajectories");

  UserEmbedding out;
  if (forced_scores) {
    out.attention = forced_scores;
  } else {
    const auto scores = ad::matmul(ad::concat_rows(trajectory_embeddings, ad::constant(contexts)), model.user_weight);
    out.attention = ad::segment_softmax(scores, offsets);
  }
  out.embedding = ad::segment_sum(ad::scale_rows(trajectory_embeddings, out.attention), offsets);
  return out;
}

ad::Var predict_credit(const TcanModel& model, const ad::Var& user_embeddings, const Matrix& manual) {
  if (manual.rows() != user_embeddings->value.rows() || manual.cols() != model.manual_dim()) {
    throw DimensionError("predict_credit: manual features " + manual.shape_str() + " do not match " +
                         std::to_string(user_embeddings->value.rows()) + " users × " +
                         std::to_string(model.manual_dim()));
  }
  const auto joined = ad::concat_rows(user_embeddings, ad::constant(manual));
  const auto hidden = ad::relu(ad::add_row_broadcast(ad::matmul(joined, model.head_w1), model.head_b1));
  return ad::sigmoid(ad::add_row_broadcast(ad::matmul(hidden, model.head_w2), model.head_b2));
}

ad::Var tcan_credit_loss(const ad::Var& predictions, std::span<const double> labels) {
  return ad::binary_cross_entropy(predictions, labels);
}

ad::Var trajectory_similarity_loss(const ad::Var& trajectory_embeddings, std::span<const std::size_t> offsets,
                                   std::size_t max_pairs, Rng& rng) {
  if (offsets.size() < 2) return ad::constant(Matrix(1, 1));
  const double users = static_cast<double>(offsets.size() - 1);
  std::vector<std::size_t> left, right;
  std::vector<double> weights;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t u = 0; u + 1 < offsets.size(); ++u) {
    const std::size_t begin = offsets[u], n = offsets[u + 1] - offsets[u];
    if (n < 2) continue;
    pairs.clear();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(begin + i, begin + j);
    std::size_t take = pairs.size();
    if (max_pairs > 0 && take > max_pairs) {
      for (std::size_t k = 0; k < max_pairs; ++k) std::swap(pairs[k], pairs[k + rng.index(pairs.size() - k)]);
      take = max_pairs;
    }
    for (std::size_t k = 0; k < take; ++k) {
      left.push_back(pairs[k].first);
      right.push_back(pairs[k].second);
      weights.push_back(-1.0 / (users * static_cast<double>(take)));
    }
  }
  if (left.empty()) return ad::constant(Matrix(1, 1));
  const auto inner = ad::row_dot(ad::gather_rows(trajectory_embeddings, left), ad::gather_rows(trajectory_embeddings, right));
  // log(1 / (1 + e^x)) = -softplus(x)
  const std::size_t count = weights.size();
  return ad::weighted_sum(ad::softplus(inner), Matrix(count, 1, std::move(weights)));
}

TcanForward tcan_forward(const TcanModel& model, std::span<const UserSample* const> users, const Matrix& region_repr) {
  if (users.empty()) throw DataError("tcan_forward: no users");
  std::vector<std::vector<RegionIndex>> trajectories;
  TcanForward f;
  f.offsets.push_back(0);
  std::size_t total = 0;
  for (const UserSample* u : users) total += u->trajectories.size();
  Matrix contexts(total, kContextDim);
  Matrix manual(users.size(), model.manual_dim());
  for (std::size_t i = 0; i < users.size(); ++i) {
    const UserSample& u = *users[i];
    if (u.manual.size() != model.manual_dim()) throw DimensionError("tcan_forward: manual feature length mismatch");
    std::copy(u.manual.begin(), u.manual.end(), manual.row(i).begin());
    for (std::size_t t = 0; t < u.trajectories.size(); ++t) {
      std::copy(u.contexts[t].begin(), u.contexts[t].end(), contexts.row(trajectories.size()).begin());
      trajectories.push_back(u.trajectories[t]);
    }
    f.offsets.push_back(trajectories.size());
  }
  f.trajectories = encode_trajectories(model, trajectories, region_repr);
  auto pooled = user_aggregate(model, f.trajectories, contexts, f.offsets);
  f.attention = pooled.attention;
  f.users = pooled.embedding;
  f.probabilities = predict_credit(model, f.users, manual);
  return f;
}

namespace {

constexpr std::size_t kInferenceChunk = 64;

template <typename Fn>
void for_each_chunk(const std::vector<UserSample>& users, Fn&& fn) {
  std::vector<const UserSample*> chunk;
  for (std::size_t begin = 0; begin < users.size(); begin += kInferenceChunk) {
    chunk.clear();
    for (std::size_t i = begin; i < std::min(users.size(), begin + kInferenceChunk); ++i) chunk.push_back(&users[i]);
    fn(chunk);
  }
}

// Copy of the model with every parameter detached, for inference.
TcanModel frozen(const TcanModel& m) {
  TcanModel f = m;
  auto detach = [](ad::Var& v) { v = ad::constant(v->value); };
  for (ad::Var* v : {&f.gru.w_update, &f.gru.w_reset, &f.gru.w_candidate, &f.gru.u_update, &f.gru.u_reset,
                     &f.gru.u_candidate, &f.gru.b_update, &f.gru.b_reset, &f.gru.b_candidate, &f.temporal_weight,
                     &f.trajectory_weight, &f.trajectory_bias, &f.user_weight, &f.head_w1, &f.head_b1, &f.head_w2,
                     &f.head_b2})
    detach(*v);
  return f;
}

std::vector<double> labels_of(const std::vector<UserSample>& users) {
  std::vector<double> y;
  for (const auto& u : users) y.push_back(u.label);
  return y;
}

}  // namespace

std::vector<double> tcan_predict(const TcanModel& model, const std::vector<UserSample>& users, const Matrix& region_repr) {
  const TcanModel f = frozen(model);
  std::vector<double> out;
  out.reserve(users.size());
  for_each_chunk(users, [&](const std::vector<const UserSample*>& chunk) {
    const auto fwd = tcan_forward(f, chunk, region_repr);
    for (double p : fwd.probabilities->value.values()) out.push_back(p);
  });
  return out;
}

double mean_intra_user_cosine(const TcanModel& model, const std::vector<UserSample>& users, const Matrix& region_repr) {
  const TcanModel f = frozen(model);
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& u : users) {
    if (u.trajectories.size() < 2) continue;
    const Matrix x = encode_trajectories(f, u.trajectories, region_repr)->value;
    std::vector<double> norms(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double s = 0.0;
      for (double v : x.row(i)) s += v * v;
      norms[i] = std::sqrt(s);
    }
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = i + 1; j < x.rows(); ++j) {
        double dot = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) dot += x(i, c) * x(j, c);
        const double denom = norms[i] * norms[j];
        total += denom > 0.0 ? dot / denom : 0.0;
        ++count;
      }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

TcanTrainResult train_tcan(TcanModel model, const std::vector<UserSample>& train,
                           const std::vector<UserSample>& validation, const Matrix& region_repr,
                           const TcanConfig& config) {
  if (train.empty()) throw DataError("train_tcan: empty training set");
  if (config.batch_size == 0) throw DataError("train_tcan: batch size must be positive");
  TcanTrainResult result;
  Rng rng = Rng(config.seed).fork(0x7ca9);
  model.gamma = config.gamma;

  const auto val_labels = labels_of(validation);
  std::vector<int> val_int(val_labels.begin(), val_labels.end());
  const bool val_has_both = !validation.empty() && std::count(val_int.begin(), val_int.end(), 1) > 0 &&
                            std::count(val_int.begin(), val_int.end(), 0) > 0;

  const auto params = model.parameters();
  Adam adam(params, AdamConfig{config.learning_rate});
  std::vector<Matrix> best_params = snapshot(params);
  double best = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<const UserSample*> batch;
  std::vector<double> batch_labels;

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      batch.clear();
      batch_labels.clear();
      for (std::size_t i = begin; i < std::min(order.size(), begin + config.batch_size); ++i) {
        batch.push_back(&train[order[i]]);
        batch_labels.push_back(train[order[i]].label);
      }
      const auto fwd = tcan_forward(model, batch, region_repr);
      auto loss = tcan_credit_loss(fwd.probabilities, batch_labels);
      if (model.gamma > 0.0) {
        loss = ad::add(loss, ad::scale(trajectory_similarity_loss(fwd.trajectories, fwd.offsets,
                                                                   config.max_pairs_per_user, rng),
                                       model.gamma));
      }
      const double value = loss->value[0];
      if (!std::isfinite(value)) {
        throw DivergenceError("T-CAN loss became non-finite at epoch " + std::to_string(epoch));
      }
      epoch_loss += value * static_cast<double>(batch.size());
      adam.zero_grad();
      ad::backward(loss);
      adam.step();
    }
    result.train_loss.push_back(epoch_loss / static_cast<double>(train.size()));
    ++result.epochs_run;

    if (validation.empty()) {
      best_params = snapshot(params);
      result.best_epoch = epoch;
      continue;
    }
    const auto probs = tcan_predict(model, validation, region_repr);
    const double vloss = ad::binary_cross_entropy(ad::constant(Matrix(probs.size(), 1, probs)), val_labels)->value[0];
    if (!std::isfinite(vloss)) throw DivergenceError("T-CAN validation loss became non-finite at epoch " + std::to_string(epoch));
    result.validation_loss.push_back(vloss);
    double criterion = -vloss;
    if (val_has_both) {
      criterion = auc(probs, val_int);
      result.validation_auc.push_back(criterion);
    }
    if (criterion > best) {
      best = criterion;
      best_params = snapshot(params);
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  restore(params, best_params);
  adam.zero_grad();
  result.model = std::move(model);
  return result;
}

std::string tcan_checkpoint_json(const TcanModel& model, const Standardizer& standardizer) {
  nlohmann::ordered_json j;
  j["format"] = "creditprint-tcan";
  j["version"] = 1;
  j["seed"] = model.seed;
  j["encoder"] = to_string(model.encoder);
  j["hyper"] = {{"gamma", model.gamma},
                {"input_dim", model.input_dim()},
                {"hidden", model.gru.hidden()},
                {"trajectory_dim", model.trajectory_dim()},
                {"manual_dim", model.manual_dim()}};
  j["standardizer"] = standardizer.to_json();
  const GruParams& g = model.gru;
  j["params"] = {{"w_update", matrix_to_json(g.w_update->value)},
                 {"w_reset", matrix_to_json(g.w_reset->value)},
                 {"w_candidate", matrix_to_json(g.w_candidate->value)},
                 {"u_update", matrix_to_json(g.u_update->value)},
                 {"u_reset", matrix_to_json(g.u_reset->value)},
                 {"u_candidate", matrix_to_json(g.u_candidate->value)},
                 {"b_update", matrix_to_json(g.b_update->value)},
                 {"b_reset", matrix_to_json(g.b_reset->value)},
                 {"b_candidate", matrix_to_json(g.b_candidate->value)},
                 {"temporal_weight", matrix_to_json(model.temporal_weight->value)},
                 {"trajectory_weight", matrix_to_json(model.trajectory_weight->value)},
                 {"trajectory_bias", matrix_to_json(model.trajectory_bias->value)},
                 {"user_weight", matrix_to_json(model.user_weight->value)},
                 {"head_w1", matrix_to_json(model.head_w1->value)},
                 {"head_b1", matrix_to_json(model.head_b1->value)},
                 {"head_w2", matrix_to_json(model.head_w2->value)},
                 {"head_b2", matrix_to_json(model.head_b2->value)}};
  return j.dump(1) + "\n";
}

TcanModel tcan_from_checkpoint_json(const std::string& text, Standardizer* standardizer) {
  try {
    const auto j = nlohmann::ordered_json::parse(text);
    if (j.at("format") != "creditprint-tcan" || j.at("version") != 1) throw DataError("not a version-1 T-CAN checkpoint");
    TcanModel m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.encoder = trajectory_encoder_from_string(j.at("encoder").get<std::string>());
    m.gamma = j.at("hyper").at("gamma").get<double>();
    const auto& p = j.at("params");
    auto load = [&](const char* name) { return ad::parameter(matrix_from_json(p.at(name))); };
    m.gru.w_update = load("w_update");
    m.gru.w_reset = load("w_reset");
    m.gru.w_candidate = load("w_candidate");
    m.gru.u_update = load("u_update");
    m.gru.u_reset = load("u_reset");
    m.gru.u_candidate = load("u_candidate");
    m.gru.b_update = load("b_update");
    m.gru.b_reset = load("b_reset");
    m.gru.b_candidate = load("b_candidate");
    m.temporal_weight = load("temporal_weight");
    m.trajectory_weight = load("trajectory_weight");
    m.trajectory_bias = load("trajectory_bias");
    m.user_weight = load("user_weight");
    m.head_w1 = load("head_w1");
    m.head_b1 = load("head_b1");
    m.head_w2 = load("head_w2");
    m.head_b2 = load("head_b2");
    if (standardizer) *standardizer = Standardizer::from_json(j.at("standardizer"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed T-CAN checkpoint: ") + e.what());
  }
}

std::string scores_csv(const std::vector<UserSample>& users, std::span<const double> probabilities) {
  if (users.size() != probabilities.size()) throw DimensionError("scores_csv: one probability per user required");
  std::string out = "user_id,probability,label\n";
  for (std::size_t i = 0; i < users.size(); ++i) {
    out += std::to_string(users[i].user) + "," + format_double(probabilities[i]) + "," + std::to_string(users[i].label) + "\n";
  }
  return out;
}

}  // namespace creditprint
