#include "creditprint/ren.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "creditprint/checkpoint.hpp"
#include "creditprint/errors.hpp"
#include "creditprint/format.hpp"
#include "creditprint/optim.hpp"

namespace creditprint {

std::string to_string(SimilarityLoss s) { return s == SimilarityLoss::verbatim ? "verbatim" : "logistic"; }

SimilarityLoss similarity_loss_from_string(const std::string& name) {
  if (name == "verbatim") return SimilarityLoss::verbatim;
  if (name == "logistic") return SimilarityLoss::logistic;
  throw ConfigError("ren.sim_loss", "expected 'verbatim' or 'logistic', got '" + name + "'");
}

RenModel RenModel::create(std::size_t input_dim, const std::vector<GraphKind>& kinds, const RenConfig& config) {
  if (kinds.empty()) throw ConfigError("ren.graphs", "at least one graph kind is required");
  if (config.embedding_dim == 0) throw ConfigError("ren.dim", "must be positive");
  Rng rng(config.seed);
  RenModel m;
  m.graph_kinds = kinds;
  m.graph_logits = ad::parameter(Matrix(1, kinds.size(), 0.0));
  m.layer0 = ad::parameter(glorot_uniform(input_dim, config.embedding_dim, rng));
  m.layer1 = ad::parameter(glorot_uniform(config.embedding_dim, config.embedding_dim, rng));
  m.classifier = ad::parameter(glorot_uniform(config.embedding_dim, 1, rng));
  m.gamma = config.gamma;
  m.delta = config.delta;
  m.similarity_loss = config.similarity_loss;
  m.seed = config.seed;
  return m;
}

std::vector<double> RenModel::attention() const {
  const Matrix a = ad::softmax_vector(ad::constant(graph_logits->value))->value;
  return a.values();
}

Matrix region_input_features(const RegionCreditTable& table) {
  const std::size_t b = table.region_count();
  Matrix h(b, kRegionFeatureDim);
  double max_log = 0.0;
  for (std::size_t v : table.visitors) max_log = std::max(max_log, std::log1p(static_cast<double>(v)));
  for (RegionIndex r = 0; r < b; ++r) {
    h(r, 0) = table.score[r];
    h(r, 1) = max_log > 0.0 ? std::log1p(static_cast<double>(table.visitors[r])) / max_log : 0.0;
    for (int s = 0; s < kSlotsPerDay; ++s) h(r, 2 + static_cast<std::size_t>(s)) = table.dynamic[r][static_cast<std::size_t>(s)];
  }
  return h;
}

ad::Var merge_graphs(const RenModel& model, std::span<const Matrix> normalized) {
  if (normalized.size() != model.graph_logits->value.size()) {
    throw DimensionError("merge_graphs: model has " + std::to_string(model.graph_logits->value.size()) +
                         " graph logits but " + std::to_string(normalized.size()) + " graphs were given");
  }
  return ad::blend(ad::softmax_vector(model.graph_logits), normalized);
}

ad::Var ren_forward(const RenModel& model, const ad::Var& merged, const Matrix& features) {
  const std::size_t b = merged->value.rows();
  if (merged->value.cols() != b || features.rows() != b) {
    throw DimensionError("ren_forward: adjacency " + merged->value.shape_str() + " with features " + features.shape_str());
  }
  auto h = ad::constant(features);
  h = ad::sigmoid(ad::matmul(merged, ad::matmul(h, model.layer0)));
  h = ad::sigmoid(ad::matmul(merged, ad::matmul(h, model.layer1)));
  return h;
}

ad::Var ren_classification_loss(const ad::Var& embeddings, const ad::Var& classifier, std::span<const int> labels,
                                std::span<const RegionIndex> regions) {
  if (regions.empty()) throw DataError("ren_classification_loss: no regions");
  std::vector<double> y;
  y.reserve(regions.size());
  for (RegionIndex r : regions) {
    if (r >= labels.size()) throw BoundsError("ren_classification_loss: region out of range");
    y.push_back(static_cast<double>(labels[r]));
  }
  auto rows = ad::gather_rows(embeddings, regions);
  return ad::binary_cross_entropy(ad::sigmoid(ad::matmul(rows, classifier)), y);
}

double default_delta(const RegionCreditTable& table) {
  std::vector<double> s;
  for (RegionIndex r : table.visited_regions()) s.push_back(table.score[r]);
  if (s.empty()) throw DataError("default_delta: no visited regions");
  std::sort(s.begin(), s.end());
  auto quantile = [&s](double q) {
    const double pos = q * static_cast<double>(s.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
  };
  return std::max(0.5 * (quantile(0.75) - quantile(0.25)), 1e-6);
}

std::vector<PairSample> sample_pairs(const RegionCreditTable& table, double delta, std::size_t per_anchor,
                                     std::uint64_t seed, std::span<const RegionIndex> candidates) {
  std::vector<RegionIndex> pool;
  if (candidates.empty()) {
    pool = table.visited_regions();
  } else {
    for (RegionIndex r : candidates)
      if (r < table.region_count() && table.visited(r)) pool.push_back(r);
  }
  const bool has_low = std::any_of(pool.begin(), pool.end(), [&](RegionIndex r) { return table.label[r] == 1; });
  const bool has_high = std::any_of(pool.begin(), pool.end(), [&](RegionIndex r) { return table.label[r] == 0; });
  if (!has_low || !has_high) throw DataError("sample_pairs: both region label classes must be present");

  Rng rng(seed);
  std::vector<PairSample> out;
  for (RegionIndex anchor : pool) {
    std::vector<RegionIndex> similar, dissimilar;
    for (RegionIndex r : pool) {
      if (r == anchor) continue;
      const double diff = std::abs(table.score[r] - table.score[anchor]);
      if (table.label[r] == table.label[anchor] && diff < delta) similar.push_back(r);
      if (table.label[r] != table.label[anchor] && diff > delta) dissimilar.push_back(r);
    }
    const std::size_t k = std::min({per_anchor, similar.size(), dissimilar.size()});
    if (k == 0) continue;
    rng.shuffle(similar);
    rng.shuffle(dissimilar);
    similar.resize(k);
    dissimilar.resize(k);
    out.push_back(PairSample{anchor, std::move(similar), std::move(dissimilar)});
  }
  return out;
}

namespace {

struct PairIndex {
  std::vector<std::size_t> anchor, similar, dissimilar;
};

PairIndex flatten(const std::vector<PairSample>& pairs) {
  PairIndex idx;
  for (const auto& p : pairs) {
    for (std::size_t k = 0; k < p.similar.size(); ++k) {
      idx.anchor.push_back(p.anchor);
      idx.similar.push_back(p.similar[k]);
      idx.dissimilar.push_back(p.dissimilar[k]);
    }
  }
  return idx;
}

}  // namespace

ad::Var ren_similarity_loss(const ad::Var& embeddings, const std::vector<PairSample>& pairs, SimilarityLoss form) {
  const PairIndex idx = flatten(pairs);
  if (idx.anchor.empty()) return ad::constant(Matrix(1, 1, 0.0));
  auto anchors = ad::gather_rows(embeddings, idx.anchor);
  auto sim = ad::row_dot(anchors, ad::gather_rows(embeddings, idx.similar));
  auto dis = ad::row_dot(anchors, ad::gather_rows(embeddings, idx.dissimilar));
  if (form == SimilarityLoss::verbatim) {
    // log s̃(x) = -softplus(x)
    return ad::add_scalar(ad::sub(ad::mean(ad::softplus(dis)), ad::mean(ad::softplus(sim))), 1.0);
  }
  return ad::add(ad::mean(ad::softplus(ad::scale(sim, -1.0))), ad::mean(ad::softplus(dis)));
}

double pair_separation(const Matrix& embeddings, const std::vector<PairSample>& pairs) {
  const PairIndex idx = flatten(pairs);
  if (idx.anchor.empty()) return 0.0;
  auto dot = [&](std::size_t a, std::size_t b) {
    double acc = 0.0;
    for (std::size_t c = 0; c < embeddings.cols(); ++c) acc += embeddings(a, c) * embeddings(b, c);
    return acc;
  };
  double sim = 0.0, dis = 0.0;
  for (std::size_t i = 0; i < idx.anchor.size(); ++i) {
    sim += dot(idx.anchor[i], idx.similar[i]);
    dis += dot(idx.anchor[i], idx.dissimilar[i]);
  }
  return (sim - dis) / static_cast<double>(idx.anchor.size());
}

RenTrainResult train_ren(RenModel model, const RegionGraphSet& graphs, const Matrix& features,
                         const RegionCreditTable& table, const RenConfig& config) {
  RenTrainResult result;
  Rng rng(config.seed ^ 0x52454E5ULL);
  std::vector<RegionIndex> visited = table.visited_regions();
  if (visited.size() < 2) throw DataError("train_ren: need at least two visited regions");
  rng.shuffle(visited);
  std::size_t n_holdout = static_cast<std::size_t>(std::ceil(config.holdout_fraction * static_cast<double>(visited.size())));
  n_holdout = std::clamp<std::size_t>(n_holdout, 1, visited.size() - 1);
  result.holdout_regions.assign(visited.begin(), visited.begin() + static_cast<std::ptrdiff_t>(n_holdout));
  result.train_regions.assign(visited.begin() + static_cast<std::ptrdiff_t>(n_holdout), visited.end());
  std::sort(result.holdout_regions.begin(), result.holdout_regions.end());
  std::sort(result.train_regions.begin(), result.train_regions.end());

  if (model.delta <= 0.0) model.delta = config.delta > 0.0 ? config.delta : default_delta(table);
  if (model.gamma > 0.0) {
    result.pairs = sample_pairs(table, model.delta, config.pairs_per_anchor, rng.next_u64(), result.train_regions);
  }

  const auto params = model.parameters();
  Adam adam(params, AdamConfig{config.learning_rate});
  double best = std::numeric_limits<double>::infinity();
  std::vector<Matrix> best_params = snapshot(params);
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    auto merged = merge_graphs(model, graphs.normalized);
    auto x = ren_forward(model, merged, features);
    auto loss = ren_classification_loss(x, model.classifier, table.label, result.train_regions);
    if (model.gamma > 0.0) {
      loss = ad::add(loss, ad::scale(ren_similarity_loss(x, result.pairs, model.similarity_loss), model.gamma));
    }
    const double val = ren_classification_loss(ad::constant(x->value), ad::constant(model.classifier->value),
                                                table.label, result.holdout_regions)
                           ->value[0];
    const double train = loss->value[0];
    if (!std::isfinite(train) || !std::isfinite(val)) {
      throw DivergenceError("REN loss became non-finite at epoch " + std::to_string(epoch));
    }
    result.train_loss.push_back(train);
    result.validation_loss.push_back(val);
    result.attention_history.push_back(model.attention());
    if (val < best) {
      best = val;
      best_params = snapshot(params);
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
    adam.zero_grad();
    ad::backward(loss);
    adam.step();
  }
  restore(params, best_params);
  adam.zero_grad();

  result.embeddings = ren_embed(model, graphs, features);
  std::size_t correct = 0;
  for (RegionIndex r : result.holdout_regions) {
    double logit = 0.0;
    for (std::size_t c = 0; c < result.embeddings.cols(); ++c) logit += result.embeddings(r, c) * model.classifier->value[c];
    if ((logit > 0.0 ? 1 : 0) == table.label[r]) ++correct;
  }
  result.holdout_accuracy = static_cast<double>(correct) / static_cast<double>(result.holdout_regions.size());
  result.model = std::move(model);
  return result;
}

Matrix ren_embed(const RenModel& model, const RegionGraphSet& graphs, const Matrix& features) {
  auto merged = ad::blend(ad::softmax_vector(ad::constant(model.graph_logits->value)), graphs.normalized);
  RenModel frozen = model;
  frozen.layer0 = ad::constant(model.layer0->value);
  frozen.layer1 = ad::constant(model.layer1->value);
  return ren_forward(frozen, merged, features)->value;
}

std::string ren_checkpoint_json(const RenModel& model) {
  nlohmann::ordered_json j;
  j["format"] = "creditprint-ren";
  j["version"] = 1;
  j["seed"] = model.seed;
  std::vector<std::string> kinds;
  for (GraphKind k : model.graph_kinds) kinds.push_back(to_string(k));
  j["graph_kinds"] = kinds;
  j["hyper"] = {{"gamma", model.gamma}, {"delta", model.delta}, {"sim_loss", to_string(model.similarity_loss)}};
  j["params"] = {{"graph_logits", matrix_to_json(model.graph_logits->value)},
                 {"layer0", matrix_to_json(model.layer0->value)},
                 {"layer1", matrix_to_json(model.layer1->value)},
                 {"classifier", matrix_to_json(model.classifier->value)}};
  return j.dump(1) + "\n";
}

RenModel ren_from_checkpoint_json(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
    if (j.at("format") != "creditprint-ren" || j.at("version") != 1) throw DataError("not a version-1 REN checkpoint");
    RenModel m;
    for (const auto& k : j.at("graph_kinds")) m.graph_kinds.push_back(graph_kind_from_string(k.get<std::string>()));
    m.seed = j.at("seed").get<std::uint64_t>();
    m.gamma = j.at("hyper").at("gamma").get<double>();
    m.delta = j.at("hyper").at("delta").get<double>();
    m.similarity_loss = similarity_loss_from_string(j.at("hyper").at("sim_loss").get<std::string>());
    const auto& p = j.at("params");
    m.graph_logits = ad::parameter(matrix_from_json(p.at("graph_logits")));
    m.layer0 = ad::parameter(matrix_from_json(p.at("layer0")));
    m.layer1 = ad::parameter(matrix_from_json(p.at("layer1")));
    m.classifier = ad::parameter(matrix_from_json(p.at("classifier")));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed REN checkpoint: ") + e.what());
  }
}

std::string embeddings_csv(const Matrix& embeddings) {
  std::string out = "region";
  for (std::size_t c = 0; c < embeddings.cols(); ++c) out += ",e" + std::to_string(c);
  out += '\n';
  for (std::size_t r = 0; r < embeddings.rows(); ++r) {
    out += std::to_string(r);
    for (double v : embeddings.row(r)) out += "," + format_double(v);
    out += '\n';
  }
  return out;
}

Matrix embeddings_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty embedding file");
  const std::size_t dim = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  std::vector<double> data;
  std::size_t rows = 0, line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string f;
    std::getline(fields, f, ',');
    if (std::stoul(f) != rows) throw ParseError(line_no, "regions must be listed in order");
    std::size_t count = 0;
    while (std::getline(fields, f, ',')) {
      data.push_back(std::stod(f));
      ++count;
    }
    if (count != dim) throw ParseError(line_no, "expected " + std::to_string(dim) + " values");
    ++rows;
  }
  return Matrix(rows, dim, std::move(data));
}

}  // namespace creditprint
