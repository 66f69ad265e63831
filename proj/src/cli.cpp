#include "creditprint/cli.hpp"

#include <filesystem>
#include <ostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "creditprint/auc.hpp"
#include "creditprint/config.hpp"
#include "creditprint/errors.hpp"
#include "creditprint/harness.hpp"
#include "creditprint/report.hpp"
#include "creditprint/synth.hpp"

namespace creditprint {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr const char* kGraphsFile = "graphs.json";
constexpr const char* kRenCheckpoint = "ren_checkpoint.json";
constexpr const char* kEmbeddingsFile = "region_embeddings.csv";
constexpr const char* kTcanCheckpoint = "tcan_checkpoint.json";
constexpr const char* kScoresFile = "scores.csv";
constexpr const char* kSplitFile = "split.csv";
constexpr const char* kFeaturesFile = "features.csv";
constexpr const char* kManifestFile = "manifest.json";

struct Session {
  RunConfig config;
  std::ostream& log;
  std::string command;
  std::string stage;
  std::vector<std::string> outputs;
  json extra = json::object();

  void begin(const std::string& name) {
    stage = name;
    log << "[" << command << "] " << name << "\n";
  }

  void write(const std::string& name, const std::string& text) {
    write_text_file(config.out_dir / name, text);
    outputs.push_back(name);
  }

  void finish() {
    stage = "manifest";
    json m;
    m["command"] = command;
    m["seed"] = config.seed;
    m["config"] = config.to_json();
    for (const auto& [k, v] : extra.items()) m[k] = v;
    m["outputs"] = outputs;
    write_text_file(config.out_dir / kManifestFile, m.dump(2) + "\n");
  }
};

std::string split_csv(const DatasetSplit& split) {
  std::string out = "user_id,part\n";
  for (auto id : split.train) out += std::to_string(id) + ",train\n";
  for (auto id : split.validation) out += std::to_string(id) + ",validation\n";
  for (auto id : split.test) out += std::to_string(id) + ",test\n";
  return out;
}

Dataset ingest(Session& s) {
  s.begin("ingest");
  return load_dataset_dir(s.config.effective_data_dir());
}

PreparedData split_stage(Session& s, const Dataset& ds) {
  s.begin("split");
  const auto split = split_users(ds.users, s.config.pipeline.fractions, s.config.seed);
  auto data = prepare_data(ds, split);
  s.extra["split_hash"] = split.hash();
  s.write(kSplitFile, split_csv(split));
  s.write(kFeaturesFile, features_csv(ds.users, ds.grid));
  return data;
}

StageOne ren_stage(Session& s, const Dataset& ds, const PreparedData& data) {
  s.begin("region-graphs");
  StageOne one;
  one.table = stage_region_table(data, ds.grid);
  one.graphs = build_region_graphs(data.train_users, ds.grid, one.table, s.config.pipeline.graph,
                                   s.config.pipeline.graph_kinds);
  one.features = region_input_features(one.table);
  s.write(kGraphsFile, graphs_to_json(one.graphs, one.table));

  s.begin("train-ren");
  auto model = RenModel::create(one.features.cols(), s.config.pipeline.graph_kinds, s.config.pipeline.ren);
  one.ren = train_ren(std::move(model), one.graphs, one.features, one.table, s.config.pipeline.ren);
  s.log << "  region holdout accuracy " << one.ren.holdout_accuracy << ", best epoch " << one.ren.best_epoch << "\n";
  s.write(kRenCheckpoint, ren_checkpoint_json(one.ren.model));
  s.write(kEmbeddingsFile, embeddings_csv(one.ren.embeddings));
  s.extra["ren"] = {{"best_epoch", one.ren.best_epoch},
                    {"holdout_accuracy", one.ren.holdout_accuracy},
                    {"graph_attention", one.ren.model.attention()}};
  return one;
}

void tcan_stage(Session& s, const PreparedData& data, const Matrix& embeddings) {
  s.begin("train-tcan");
  const auto two = run_stage_two(data, embeddings, s.config.pipeline.tcan);
  s.log << "  test AUC " << two.test_auc << ", best epoch " << two.tcan.best_epoch << "\n";
  s.write(kTcanCheckpoint, tcan_checkpoint_json(two.tcan.model, data.standardizer));
  s.write(kScoresFile, scores_csv(data.test, two.test_probabilities));
  s.extra["tcan"] = {{"best_epoch", two.tcan.best_epoch}, {"epochs_run", two.tcan.epochs_run}, {"test_auc", two.test_auc}};
}

Matrix stored_embeddings(Session& s) {
  s.begin("load-embeddings");
  return embeddings_from_csv(read_text_file(s.config.out_dir / kEmbeddingsFile));
}

void cmd_generate(Session& s) {
  s.begin("generate");
  const auto result = generate_synthetic(s.config.synth);
  write_synthetic(result, s.config.synth, s.config.out_dir);
  for (const char* f : {kTrajectoryFile, kLabelFile, kGridFile, kSynthMetaFile}) s.outputs.emplace_back(f);
  std::size_t visits = 0;
  for (const auto& u : result.dataset.users)
    for (const auto& t : u.trajectories) visits += t.visits.size();
  s.extra["users"] = result.dataset.users.size();
  s.extra["visits"] = visits;
}

void cmd_build_graphs(Session& s) {
  const auto ds = ingest(s);
  const auto data = split_stage(s, ds);
  s.begin("region-graphs");
  const auto table = stage_region_table(data, ds.grid);
  const auto graphs = build_region_graphs(data.train_users, ds.grid, table, s.config.pipeline.graph,
                                          s.config.pipeline.graph_kinds);
  s.write(kGraphsFile, graphs_to_json(graphs, table));
}

void cmd_train_ren(Session& s) {
  const auto ds = ingest(s);
  const auto data = split_stage(s, ds);
  ren_stage(s, ds, data);
}

void cmd_train_tcan(Session& s) {
  const auto ds = ingest(s);
  const auto data = split_stage(s, ds);
  tcan_stage(s, data, stored_embeddings(s));
}

void cmd_train(Session& s) {
  const auto ds = ingest(s);
  const auto data = split_stage(s, ds);
  const auto one = ren_stage(s, ds, data);
  tcan_stage(s, data, one.ren.embeddings);
}

ExperimentConfig experiment(const RunConfig& c) {
  ExperimentConfig e;
  e.pipeline = c.pipeline;
  e.seeds = c.effective_eval_seeds();
  return e;
}

void emit(Session& s, const EvalReport& report) {
  s.begin("report");
  emit_report(report, s.config.out_dir);
  for (const char* f : {"report.json", "report.csv", "sweep.csv"}) s.outputs.emplace_back(f);
  for (const auto& v : report.variants()) s.log << "  " << v << ": mean AUC " << report.mean_auc(v) << "\n";
}

void cmd_evaluate(Session& s) {
  const auto ds = ingest(s);
  const fs::path checkpoint = s.config.out_dir / kTcanCheckpoint;
  if (!fs::exists(checkpoint) || !fs::exists(s.config.out_dir / kEmbeddingsFile)) {
    s.begin("experiment");
    ExperimentConfig e = experiment(s.config);
    e.variants = {Variant::manual_lr, Variant::manual_nn, Variant::full};
    emit(s, run_experiment_matrix(ds, e, [&](const std::string& m) { s.log << "  " << m << "\n"; }));
    return;
  }

  // Score the stored model on the test users of its own split.
  const auto data = split_stage(s, ds);
  const auto embeddings = stored_embeddings(s);
  s.begin("score");
  Standardizer stored;
  const auto model = tcan_from_checkpoint_json(read_text_file(checkpoint), &stored);
  if (!(stored == data.standardizer)) {
    throw DataError("checkpoint standardizer does not match the training split of seed " + std::to_string(s.config.seed));
  }
  const auto probs = tcan_predict(model, data.test, embeddings);
  std::vector<int> labels;
  for (const auto& u : data.test) labels.push_back(u.label);
  s.write(kScoresFile, scores_csv(data.test, probs));

  EvalReport report;
  VariantResult full;
  full.variant = variant_name(Variant::full);
  full.seed = s.config.seed;
  full.auc = auc(probs, labels);
  full.n_test = data.test.size();
  full.split_hash = data.split.hash();
  full.diagnostics["from_checkpoint"] = 1.0;
  report.results.push_back(full);

  s.begin("baselines");
  ExperimentConfig e = experiment(s.config);
  e.seeds = {s.config.seed};
  e.variants = {Variant::manual_lr, Variant::manual_nn};
  const auto baselines = run_experiment_matrix(ds, e);
  report.results.insert(report.results.begin(), baselines.results.begin(), baselines.results.end());
  emit(s, report);
}

void cmd_ablate(Session& s) {
  const auto ds = ingest(s);
  s.begin("experiment");
  ExperimentConfig e = experiment(s.config);
  e.sweep = s.config.sweep;
  emit(s, run_experiment_matrix(ds, e, [&](const std::string& m) { s.log << "  " << m << "\n"; }));
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Credit assessment from mobility trajectories: data generation, region graphs, two-stage training, "
               "evaluation and ablations."};
  app.name("creditprint");
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  bool sweep = false;
  app.add_option("--config", config_path, "key=value configuration file");
  auto* seed_opt = app.add_option("--seed", seed, "master seed; overrides the config file");
  app.add_option("--out", out_dir, "output directory; overrides paths.out");
  app.footer(config_help());

  app.add_subcommand("generate", "write a synthetic dataset into the output directory");
  app.add_subcommand("build-graphs", "compute region scores and region graphs from the training users");
  app.add_subcommand("train-ren", "train the region embedding network");
  app.add_subcommand("train-tcan", "train the credit network on stored region embeddings and score test users");
  app.add_subcommand("train", "run both training stages and score test users");
  app.add_subcommand("evaluate", "compute test AUC for the stored model (or a fresh one) and the manual baselines");
  auto* ablate = app.add_subcommand("ablate", "train and evaluate every variant over the evaluation seeds");
  ablate->add_flag("--sweep", sweep, "also run the embedding-dimension sweep");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  Session session{RunConfig{}, err, command, "config", {}, json::object()};
  try {
    RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (seed_opt->count() > 0) config.set_seed(seed);
    if (!out_dir.empty()) config.out_dir = out_dir;
    if (sweep) config.sweep = true;
    config.validate();
    session.config = config;

    if (command == "generate") cmd_generate(session);
    else if (command == "build-graphs") cmd_build_graphs(session);
    else if (command == "train-ren") cmd_train_ren(session);
    else if (command == "train-tcan") cmd_train_tcan(session);
    else if (command == "train") cmd_train(session);
    else if (command == "evaluate") cmd_evaluate(session);
    else cmd_ablate(session);
    session.finish();
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "creditprint: configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DivergenceError& e) {
    err << "creditprint: stage '" << session.stage << "' diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const IoError& e) {
    err << "creditprint: stage '" << session.stage << "' failed: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "creditprint: stage '" << session.stage << "' failed: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace creditprint
