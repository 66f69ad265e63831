#include "creditprint/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>

#include "creditprint/auc.hpp"
#include "creditprint/errors.hpp"

namespace creditprint {

PipelineConfig PipelineConfig::with_seed(std::uint64_t s) const {
  PipelineConfig c = *this;
  c.seed = s;
  c.ren.seed = s;
  c.tcan.seed = s;
  c.mlp.seed = s;
  return c;
}

PreparedData prepare_data(const Dataset& dataset, const DatasetSplit& split) {
  PreparedData d;
  d.split = split;
  d.train_users = select_users(dataset.users, split.train);
  d.validation_users = select_users(dataset.users, split.validation);
  d.test_users = select_users(dataset.users, split.test);
  if (d.train_users.empty() || d.test_users.empty()) throw DataError("split leaves no training or test users");

  d.standardizer = Standardizer::fit(manual_feature_matrix(d.train_users, dataset.grid));
  d.train_manual = d.standardizer.apply(manual_feature_matrix(d.train_users, dataset.grid));
  d.validation_manual = d.standardizer.apply(manual_feature_matrix(d.validation_users, dataset.grid));
  d.test_manual = d.standardizer.apply(manual_feature_matrix(d.test_users, dataset.grid));

  auto samples = [](const std::vector<UserRecord>& users, const Matrix& manual) {
    std::vector<UserSample> out;
    for (std::size_t i = 0; i < users.size(); ++i) {
      const auto row = manual.row(i);
      out.push_back(make_user_sample(users[i], {row.begin(), row.end()}));
    }
    return out;
  };
  d.train = samples(d.train_users, d.train_manual);
  d.validation = samples(d.validation_users, d.validation_manual);
  d.test = samples(d.test_users, d.test_manual);
  return d;
}

RegionCreditTable stage_region_table(const PreparedData& data, const RegionGrid& grid) {
  return region_credit_scores(data.train_users, grid);
}

StageOne run_stage_one(const PreparedData& data, const RegionGrid& grid, const PipelineConfig& config) {
  StageOne s;
  s.table = stage_region_table(data, grid);
  s.graphs = build_region_graphs(data.train_users, grid, s.table, config.graph, config.graph_kinds);
  s.features = region_input_features(s.table);
  auto model = RenModel::create(s.features.cols(), config.graph_kinds, config.ren);
  s.ren = train_ren(std::move(model), s.graphs, s.features, s.table, config.ren);
  return s;
}

StageTwo run_stage_two(const PreparedData& data, const Matrix& region_repr, const TcanConfig& config) {
  StageTwo s;
  auto model = TcanModel::create(region_repr.cols(), kManualFeatureDim, config);
  s.tcan = train_tcan(std::move(model), data.train, data.validation, region_repr, config);
  s.test_probabilities = tcan_predict(s.tcan.model, data.test, region_repr);
  std::vector<int> labels;
  for (const auto& u : data.test) labels.push_back(u.label);
  const bool both = std::count(labels.begin(), labels.end(), 1) > 0 && std::count(labels.begin(), labels.end(), 0) > 0;
  s.test_auc = both ? auc(s.test_probabilities, labels) : std::numeric_limits<double>::quiet_NaN();
  return s;
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::manual_lr: return "manual_lr";
    case Variant::manual_nn: return "manual_nn";
    case Variant::without_ren: return "creditprint_without_ren";
    case Variant::without_ten: return "creditprint_without_ten";
    case Variant::full: return "creditprint_full";
    case Variant::single_distance: return "single_graph_distance";
    case Variant::single_interaction: return "single_graph_interaction";
    case Variant::single_correlation: return "single_graph_correlation";
    case Variant::gamma_ren_0: return "gamma_ren_0";
    case Variant::gamma_tcan_0: return "gamma_tcan_0";
  }
  throw std::logic_error("unhandled variant");
}

Variant variant_from_string(const std::string& name) {
  for (Variant v : kAllVariants)
    if (variant_name(v) == name) return v;
  throw ConfigError("variants", "unknown variant '" + name + "'");
}

std::vector<PairSample> diagnostic_pairs(const RegionCreditTable& table, const RenConfig& config, std::uint64_t seed) {
  const double delta = config.delta > 0.0 ? config.delta : default_delta(table);
  return sample_pairs(table, delta, config.pairs_per_anchor, Rng(seed).fork(0xd1a6).next_u64());
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<int> labels_of(const std::vector<UserSample>& users) {
  std::vector<int> y;
  for (const auto& u : users) y.push_back(u.label);
  return y;
}

// Lazily trained stage-one results shared between variants of one seed.
class SeedRun {
 public:
  SeedRun(const Dataset& dataset, const PipelineConfig& config, const PreparedData& data)
      : dataset_(dataset), config_(config), data_(data) {}

  const RegionGrid& grid() const { return dataset_.grid; }

  const RegionCreditTable& table() {
    if (!table_) table_ = stage_region_table(data_, dataset_.grid);
    return *table_;
  }

  const std::vector<PairSample>& pairs() {
    if (!pairs_) pairs_ = diagnostic_pairs(table(), config_.ren, config_.seed);
    return *pairs_;
  }

  // Full stage one. `reused_seconds` receives its training time when a
  // cached result is returned, so every variant reports its whole cost.
  const StageOne& full(double& reused_seconds) {
    if (full_) {
      reused_seconds = full_seconds_;
      return *full_;
    }
    const auto start = Clock::now();
    full_ = run_stage_one(data_, dataset_.grid, config_);
    full_seconds_ = seconds_since(start);
    reused_seconds = 0.0;
    return *full_;
  }

 private:
  const Dataset& dataset_;
  const PipelineConfig& config_;
  const PreparedData& data_;
  std::optional<RegionCreditTable> table_;
  std::optional<std::vector<PairSample>> pairs_;
  std::optional<StageOne> full_;
  double full_seconds_ = 0.0;
};

double defined_auc(double value) {
  if (std::isnan(value)) throw DataError("test users are all of one class; AUC is undefined");
  return value;
}

void run_variant(Variant v, SeedRun& run, const PreparedData& data, const PipelineConfig& config, VariantResult& out) {
  const auto test_labels = labels_of(data.test);
  double reused = 0.0;

  auto credit_network = [&](const Matrix& region_repr, TcanConfig tcan) {
    const auto two = run_stage_two(data, region_repr, tcan);
    out.auc = defined_auc(two.test_auc);
    out.diagnostics["tcan_best_epoch"] = static_cast<double>(two.tcan.best_epoch);
    out.diagnostics["tcan_epochs"] = static_cast<double>(two.tcan.epochs_run);
    out.diagnostics["intra_user_cosine"] = mean_intra_user_cosine(two.tcan.model, data.test, region_repr);
  };
  auto ren_diagnostics = [&](const StageOne& one) {
    out.diagnostics["ren_holdout_accuracy"] = one.ren.holdout_accuracy;
    out.diagnostics["ren_pair_separation"] = pair_separation(one.ren.embeddings, run.pairs());
    out.diagnostics["ren_best_epoch"] = static_cast<double>(one.ren.best_epoch);
  };

  switch (v) {
    case Variant::manual_lr: {
      const auto m = fit_logistic(data.train_manual, labels_of(data.train), config.logistic);
      out.auc = auc(m.predict(data.test_manual), test_labels);
      out.diagnostics["iterations"] = static_cast<double>(m.iterations);
      out.diagnostics["gradient_norm"] = m.gradient_norm;
      break;
    }
    case Variant::manual_nn: {
      const auto m = fit_manual_nn(data.train_manual, labels_of(data.train), data.validation_manual,
                                   labels_of(data.validation), config.mlp);
      out.auc = auc(m.predict(data.test_manual), test_labels);
      out.diagnostics["best_epoch"] = static_cast<double>(m.best_epoch);
      break;
    }
    case Variant::without_ren:
      credit_network(region_score_representation(run.table()), config.tcan);
      break;
    case Variant::without_ten: {
      const auto& one = run.full(reused);
      TcanConfig t = config.tcan;
      t.encoder = TrajectoryEncoder::mean_region;
      credit_network(one.ren.embeddings, t);
      break;
    }
    case Variant::full: {
      const auto& one = run.full(reused);
      ren_diagnostics(one);
      credit_network(one.ren.embeddings, config.tcan);
      break;
    }
    case Variant::gamma_tcan_0: {
      const auto& one = run.full(reused);
      TcanConfig t = config.tcan;
      t.gamma = 0.0;
      credit_network(one.ren.embeddings, t);
      break;
    }
    case Variant::single_distance:
    case Variant::single_interaction:
    case Variant::single_correlation:
    case Variant::gamma_ren_0: {
      PipelineConfig c = config;
      if (v == Variant::gamma_ren_0) {
        c.ren.gamma = 0.0;
      } else {
        c.graph_kinds = {v == Variant::single_distance      ? GraphKind::distance
                         : v == Variant::single_interaction ? GraphKind::interaction
                                                            : GraphKind::correlation};
      }
      const auto one = run_stage_one(data, run.grid(), c);
      ren_diagnostics(one);
      credit_network(one.ren.embeddings, c.tcan);
      break;
    }
  }
  out.wall_time_s += reused;
}

}  // namespace

EvalReport run_experiment_matrix(const Dataset& dataset, const ExperimentConfig& config, const ProgressFn& progress) {
  EvalReport report;
  auto say = [&](const std::string& msg) {
    if (progress) progress(msg);
  };
  for (std::uint64_t seed : config.seeds) {
    const PipelineConfig pipeline = config.pipeline.with_seed(seed);
    const auto split = split_users(dataset.users, pipeline.fractions, seed);
    const auto data = prepare_data(dataset, split);
    const std::string hash = split.hash();
    SeedRun run(dataset, pipeline, data);

    for (Variant v : config.variants) {
      VariantResult r;
      r.variant = variant_name(v);
      r.seed = seed;
      r.n_test = data.test.size();
      r.split_hash = hash;
      const auto start = Clock::now();
      try {
        run_variant(v, run, data, pipeline, r);
      } catch (const std::exception& e) {
        r.status = "failed";
        r.error = e.what();
        r.auc = std::numeric_limits<double>::quiet_NaN();
      }
      r.wall_time_s += seconds_since(start);
      say("seed " + std::to_string(seed) + " " + r.variant + ": " + (r.status == "ok" ? "auc " + std::to_string(r.auc) : r.error));
      report.results.push_back(std::move(r));
    }

    if (!config.sweep) continue;
    for (std::size_t rd : config.sweep_region_dims) {
      for (std::size_t td : config.sweep_trajectory_dims) {
        SweepResult s;
        s.region_dim = rd;
        s.trajectory_dim = td;
        s.seed = seed;
        const auto start = Clock::now();
        try {
          PipelineConfig c = pipeline;
          c.ren.embedding_dim = rd;
          c.tcan.trajectory_dim = td;
          const auto one = run_stage_one(data, dataset.grid, c);
          s.auc = defined_auc(run_stage_two(data, one.ren.embeddings, c.tcan).test_auc);
        } catch (const std::exception& e) {
          s.status = "failed";
          s.error = e.what();
          s.auc = std::numeric_limits<double>::quiet_NaN();
        }
        s.wall_time_s = seconds_since(start);
        say("seed " + std::to_string(seed) + " sweep " + std::to_string(rd) + "x" + std::to_string(td) + ": " +
            (s.status == "ok" ? "auc " + std::to_string(s.auc) : s.error));
        report.sweep.push_back(std::move(s));
      }
    }
  }
  return report;
}

}  // namespace creditprint
