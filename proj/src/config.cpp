#include "creditprint/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

#include "creditprint/errors.hpp"
#include "creditprint/mobility.hpp"

namespace creditprint {
namespace {

using json = nlohmann::ordered_json;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  const auto n = parse_uint(key, v);
  if (n == 0) throw ConfigError(key, "must be at least 1");
  return static_cast<std::size_t>(n);
}

int parse_int(const std::string& key, const std::string& v) {
  const auto n = parse_uint(key, v);
  if (n > 1000000000ULL) throw ConfigError(key, "value too large");
  return static_cast<int>(n);
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty() || !std::isfinite(out)) {
    throw ConfigError(key, "expected a finite number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

struct Entry {
  std::string key;
  std::string description;
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define CP_ENTRY(KEY, DESC, GET, PARSE)                                                  \
  Entry {                                                                                \
    KEY, DESC, [](const RunConfig& c) -> json { return c.GET; },                         \
        [](RunConfig& c, const std::string& v) { c.GET = PARSE(KEY, v); }                \
  }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t;
    t.push_back({"paths.data", "directory holding trajectories.csv, labels.csv and grid.txt (empty: the output directory)",
                 [](const RunConfig& c) -> json { return c.data_dir.string(); },
                 [](RunConfig& c, const std::string& v) { c.data_dir = v; }});
    t.push_back({"paths.out", "directory that receives every output file",
                 [](const RunConfig& c) -> json { return c.out_dir.string(); },
                 [](RunConfig& c, const std::string& v) {
                   if (v.empty()) throw ConfigError("paths.out", "must not be empty");
                   c.out_dir = v;
                 }});
    t.push_back({"seed", "master seed for generation, splitting and training",
                 [](const RunConfig& c) -> json { return c.seed; },
                 [](RunConfig& c, const std::string& v) { c.set_seed(parse_uint("seed", v)); }});

    t.push_back(CP_ENTRY("synth.users", "number of synthetic users", synth.users, parse_int));
    t.push_back(CP_ENTRY("synth.low_credit_fraction", "probability that a synthetic user is labeled low-credit",
                         synth.low_credit_fraction, parse_real));
    t.push_back(CP_ENTRY("synth.grid_rows", "region grid rows", synth.grid_rows, parse_int));
    t.push_back(CP_ENTRY("synth.grid_cols", "region grid columns", synth.grid_cols, parse_int));
    t.push_back(CP_ENTRY("synth.cell_km", "side length of one grid cell in km", synth.cell_km, parse_real));
    t.push_back(CP_ENTRY("synth.days", "observation window in days", synth.days, parse_int));
    t.push_back(CP_ENTRY("synth.beta", "location signal strength in [0, 1]; 0 makes labels independent of places",
                         synth.signal_strength, parse_real));
    t.push_back(CP_ENTRY("synth.manual_signal",
                         "label-dependent shift in activity volume in [0, 1]; 0 gives both classes the same volume",
                         synth.manual_feature_signal, parse_real));

    t.push_back(CP_ENTRY("graph.min_cooccurrence", "trajectories containing both regions needed for an interaction edge",
                         pipeline.graph.min_cooccurrence, parse_count));
    t.push_back(CP_ENTRY("graph.rho_threshold", "Pearson correlation needed for a correlation edge",
                         pipeline.graph.rho_threshold, parse_real));
    t.push_back(CP_ENTRY("graph.min_visits", "visitor count a region needs before it can get correlation edges",
                         pipeline.graph.min_visits, parse_count));
    t.push_back(CP_ENTRY("graph.degree_self_loops",
                         "normalize with degrees of A + I (true) or of A alone (false)",
                         pipeline.graph.degree_with_self_loops, parse_bool));

    t.push_back(CP_ENTRY("ren.dim", "region embedding width", pipeline.ren.embedding_dim, parse_count));
    t.push_back(CP_ENTRY("ren.gamma", "weight of the region similarity term", pipeline.ren.gamma, parse_real));
    t.push_back({"ren.delta", "score gap separating similar from dissimilar regions (auto: half the IQR of scores)",
                 [](const RunConfig& c) -> json {
                   return c.pipeline.ren.delta > 0.0 ? json(c.pipeline.ren.delta) : json("auto");
                 },
                 [](RunConfig& c, const std::string& v) {
                   if (v == "auto") {
                     c.pipeline.ren.delta = -1.0;
                     return;
                   }
                   const double d = parse_real("ren.delta", v);
                   if (!(d > 0.0)) throw ConfigError("ren.delta", "must be positive or 'auto'");
                   c.pipeline.ren.delta = d;
                 }});
    t.push_back(CP_ENTRY("ren.pairs_per_anchor", "similar and dissimilar regions sampled per anchor",
                         pipeline.ren.pairs_per_anchor, parse_count));
    t.push_back(CP_ENTRY("ren.epochs", "maximum region-network epochs", pipeline.ren.max_epochs, parse_count));
    t.push_back(CP_ENTRY("ren.patience", "epochs without holdout improvement before stopping",
                         pipeline.ren.patience, parse_count));
    t.push_back(CP_ENTRY("ren.lr", "Adam learning rate for the region network", pipeline.ren.learning_rate, parse_real));
    t.push_back({"ren.sim_loss", "similarity term form: verbatim or logistic",
                 [](const RunConfig& c) -> json { return to_string(c.pipeline.ren.similarity_loss); },
                 [](RunConfig& c, const std::string& v) {
                   try {
                     c.pipeline.ren.similarity_loss = similarity_loss_from_string(v);
                   } catch (const std::exception&) {
                     throw ConfigError("ren.sim_loss", "expected verbatim or logistic, got '" + v + "'");
                   }
                 }});
    t.push_back({"ren.graphs", "comma-separated region graphs to merge: distance, interaction, correlation",
                 [](const RunConfig& c) -> json {
                   std::string s;
                   for (GraphKind k : c.pipeline.graph_kinds) s += (s.empty() ? "" : ",") + to_string(k);
                   return s;
                 },
                 [](RunConfig& c, const std::string& v) {
                   std::vector<GraphKind> kinds;
                   for (const auto& name : split_list(v)) {
                     try {
                       kinds.push_back(graph_kind_from_string(name));
                     } catch (const std::exception&) {
                       throw ConfigError("ren.graphs", "unknown graph '" + name + "'");
                     }
                   }
                   c.pipeline.graph_kinds = kinds;
                 }});

    t.push_back(CP_ENTRY("tcan.hidden", "GRU hidden width", pipeline.tcan.hidden, parse_count));
    t.push_back(CP_ENTRY("tcan.dim", "trajectory embedding width", pipeline.tcan.trajectory_dim, parse_count));
    t.push_back(CP_ENTRY("tcan.head_hidden", "hidden width of the prediction head", pipeline.tcan.head_hidden, parse_count));
    t.push_back(CP_ENTRY("tcan.gamma", "weight of the trajectory similarity term", pipeline.tcan.gamma, parse_real));
    t.push_back(CP_ENTRY("tcan.batch", "users per mini-batch", pipeline.tcan.batch_size, parse_count));
    t.push_back(CP_ENTRY("tcan.epochs", "maximum credit-network epochs", pipeline.tcan.max_epochs, parse_count));
    t.push_back(CP_ENTRY("tcan.patience", "epochs without validation improvement before stopping",
                         pipeline.tcan.patience, parse_count));
    t.push_back(CP_ENTRY("tcan.lr", "Adam learning rate for the credit network", pipeline.tcan.learning_rate, parse_real));
    t.push_back(CP_ENTRY("tcan.max_pairs", "trajectory pairs sampled per user per step",
                         pipeline.tcan.max_pairs_per_user, parse_count));

    t.push_back({"eval.seeds", "comma-separated seeds for evaluate and ablate (empty: the master seed)",
                 [](const RunConfig& c) -> json {
                   std::string s;
                   for (auto v : c.eval_seeds) s += (s.empty() ? "" : ",") + std::to_string(v);
                   return s;
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.eval_seeds.clear();
                   if (v.empty()) return;
                   for (const auto& item : split_list(v)) c.eval_seeds.push_back(parse_uint("eval.seeds", item));
                 }});
    t.push_back(CP_ENTRY("eval.sweep", "also run the region-dim × trajectory-dim sweep during ablate", sweep, parse_bool));
    return t;
  }();
  return table;
}

#undef CP_ENTRY

std::string display(const json& j) { return j.is_string() ? j.get<std::string>() : j.dump(); }

}  // namespace

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  synth.seed = s;
  pipeline = pipeline.with_seed(s);
}

void RunConfig::validate() const {
  synth.validate();
  const auto& p = pipeline;
  if (!(p.graph.rho_threshold >= -1.0 && p.graph.rho_threshold <= 1.0)) {
    throw ConfigError("graph.rho_threshold", "must be in [-1, 1]");
  }
  if (p.graph.min_visits < 2) throw ConfigError("graph.min_visits", "must be at least 2");
  if (!(p.ren.gamma >= 0.0)) throw ConfigError("ren.gamma", "must be non-negative");
  if (!(p.ren.learning_rate > 0.0)) throw ConfigError("ren.lr", "must be positive");
  if (p.graph_kinds.empty()) throw ConfigError("ren.graphs", "at least one graph is required");
  if (std::set<GraphKind>(p.graph_kinds.begin(), p.graph_kinds.end()).size() != p.graph_kinds.size()) {
    throw ConfigError("ren.graphs", "graphs must not repeat");
  }
  if (!(p.tcan.gamma >= 0.0)) throw ConfigError("tcan.gamma", "must be non-negative");
  if (!(p.tcan.learning_rate > 0.0)) throw ConfigError("tcan.lr", "must be positive");
  if (out_dir.empty()) throw ConfigError("paths.out", "must not be empty");
}

json RunConfig::to_json() const {
  json j = json::object();
  for (const auto& e : entries()) j[e.key] = e.get(*this);
  return j;
}

const std::vector<ConfigKeyInfo>& config_keys() {
  static const std::vector<ConfigKeyInfo> keys = [] {
    std::vector<ConfigKeyInfo> out;
    const RunConfig defaults;
    for (const auto& e : entries()) out.push_back({e.key, display(e.get(defaults)), e.description});
    return out;
  }();
  return keys;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& e : entries()) {
    if (e.key == key) {
      e.set(config, value);
      return;
    }
  }
  throw ConfigError(key, "unknown configuration key");
}

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("", "line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError(key, "line " + std::to_string(line_no) + ": key given twice");
    set_config_value(config, key, value);
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const IoError& e) {
    throw ConfigError("", std::string("cannot read config file: ") + e.what());
  }
  return parse_config(text);
}

std::string config_help() {
  std::size_t width = 0;
  for (const auto& k : config_keys()) width = std::max(width, k.key.size());
  std::string out = "Configuration keys (key=value lines in the --config file):\n";
  for (const auto& k : config_keys()) {
    out += "  " + k.key + std::string(width - k.key.size() + 2, ' ') + k.description + " [default: " +
           (k.default_value.empty() ? "\"\"" : k.default_value) + "]\n";
  }
  return out;
}

}  // namespace creditprint
