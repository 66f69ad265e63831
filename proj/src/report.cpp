#include "creditprint/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "creditprint/errors.hpp"
#include "creditprint/format.hpp"
#include "creditprint/mobility.hpp"

namespace creditprint {
namespace {

using json = nlohmann::ordered_json;

// NaN is not representable in JSON; failed runs store null.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double number_from(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

bool same_number(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

}  // namespace

std::vector<ReferenceValue> published_references() {
  const std::string note = "proprietary mobile-operator dataset; not reproducible here";
  return {
      {"creditprint_full", 0.784, false, "unknown", note},
      {"creditprint_without_ren", 0.732, false, "unknown", note},
      {"creditprint_without_ten", 0.723, false, "unknown", note},
      {"manual_lr", 0.701, false, "unknown", note},
      {"manual_rf", 0.695, false, "unknown", note + "; model not implemented"},
      {"manual_nn", 0.707, false, "unknown", note},
      {"gamma_ren_0", 0.775, false, "unknown", note},
      {"gamma_tcan_0", 0.756, false, "unknown", note},
  };
}

double EvalReport::mean_auc(const std::string& variant) const {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& r : results) {
    if (r.variant != variant || r.status != "ok" || !std::isfinite(r.auc)) continue;
    total += r.auc;
    ++n;
  }
  return n ? total / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

std::vector<std::string> EvalReport::variants() const {
  std::vector<std::string> out;
  for (const auto& r : results)
    if (std::find(out.begin(), out.end(), r.variant) == out.end()) out.push_back(r.variant);
  return out;
}

bool operator==(const EvalReport& a, const EvalReport& b) {
  if (a.results.size() != b.results.size() || a.sweep.size() != b.sweep.size() || a.references != b.references) return false;
  for (std::size_t i = 0; i < a.results.size(); ++i) {
    const auto &x = a.results[i], &y = b.results[i];
    if (x.variant != y.variant || x.seed != y.seed || !same_number(x.auc, y.auc) || x.n_test != y.n_test ||
        x.wall_time_s != y.wall_time_s || x.status != y.status || x.error != y.error || x.split_hash != y.split_hash ||
        x.diagnostics.size() != y.diagnostics.size())
      return false;
    for (const auto& [k, v] : x.diagnostics) {
      auto it = y.diagnostics.find(k);
      if (it == y.diagnostics.end() || !same_number(v, it->second)) return false;
    }
  }
  for (std::size_t i = 0; i < a.sweep.size(); ++i) {
    const auto &x = a.sweep[i], &y = b.sweep[i];
    if (x.region_dim != y.region_dim || x.trajectory_dim != y.trajectory_dim || x.seed != y.seed ||
        !same_number(x.auc, y.auc) || x.wall_time_s != y.wall_time_s || x.status != y.status || x.error != y.error)
      return false;
  }
  return true;
}

std::string report_to_json(const EvalReport& report) {
  json j;
  j["format"] = "creditprint-report";
  j["version"] = 1;
  json results = json::array();
  for (const auto& r : report.results) {
    json d = json::object();
    for (const auto& [k, v] : r.diagnostics) d[k] = number(v);
    results.push_back({{"variant", r.variant},
                       {"seed", r.seed},
                       {"auc", number(r.auc)},
                       {"n_test", r.n_test},
                       {"wall_time_s", r.wall_time_s},
                       {"status", r.status},
                       {"error", r.error},
                       {"split_hash", r.split_hash},
                       {"diagnostics", d}});
  }
  j["results"] = results;
  json summary = json::object();
  for (const auto& v : report.variants()) summary[v] = {{"mean_auc", number(report.mean_auc(v))}};
  j["summary"] = summary;
  json sweep = json::array();
  for (const auto& s : report.sweep) {
    sweep.push_back({{"region_dim", s.region_dim},
                     {"trajectory_dim", s.trajectory_dim},
                     {"seed", s.seed},
                     {"auc", number(s.auc)},
                     {"wall_time_s", s.wall_time_s},
                     {"status", s.status},
                     {"error", s.error}});
  }
  j["sweep"] = sweep;
  json refs = json::array();
  for (const auto& r : report.references) {
    refs.push_back({{"variant", r.variant},
                    {"auc", r.auc},
                    {"reproducible", r.reproducible},
                    {"protocol", r.protocol},
                    {"note", r.note}});
  }
  j["references"] = refs;
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    if (j.at("format") != "creditprint-report" || j.at("version") != 1) throw DataError("not a version-1 report");
    EvalReport report;
    for (const auto& r : j.at("results")) {
      VariantResult v;
      v.variant = r.at("variant").get<std::string>();
      v.seed = r.at("seed").get<std::uint64_t>();
      v.auc = number_from(r.at("auc"));
      v.n_test = r.at("n_test").get<std::size_t>();
      v.wall_time_s = r.at("wall_time_s").get<double>();
      v.status = r.at("status").get<std::string>();
      v.error = r.at("error").get<std::string>();
      v.split_hash = r.at("split_hash").get<std::string>();
      for (const auto& [k, d] : r.at("diagnostics").items()) v.diagnostics[k] = number_from(d);
      report.results.push_back(std::move(v));
    }
    for (const auto& s : j.at("sweep")) {
      SweepResult r;
      r.region_dim = s.at("region_dim").get<std::size_t>();
      r.trajectory_dim = s.at("trajectory_dim").get<std::size_t>();
      r.seed = s.at("seed").get<std::uint64_t>();
      r.auc = number_from(s.at("auc"));
      r.wall_time_s = s.at("wall_time_s").get<double>();
      r.status = s.at("status").get<std::string>();
      r.error = s.at("error").get<std::string>();
      report.sweep.push_back(std::move(r));
    }
    report.references.clear();
    for (const auto& r : j.at("references")) {
      report.references.push_back({r.at("variant").get<std::string>(), r.at("auc").get<double>(),
                                   r.at("reproducible").get<bool>(), r.at("protocol").get<std::string>(),
                                   r.at("note").get<std::string>()});
    }
    return report;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

std::string report_csv(const EvalReport& report) {
  std::string out = "variant,auc,seed,wall_time_s\n";
  for (const auto& r : report.results) {
    out += r.variant + "," + format_double(r.auc) + "," + std::to_string(r.seed) + "," + format_double(r.wall_time_s) + "\n";
  }
  return out;
}

std::string sweep_csv(const EvalReport& report) {
  std::string out = "region_dim,trajectory_dim,seed,auc,wall_time_s,status\n";
  for (const auto& s : report.sweep) {
    out += std::to_string(s.region_dim) + "," + std::to_string(s.trajectory_dim) + "," + std::to_string(s.seed) + "," +
           format_double(s.auc) + "," + format_double(s.wall_time_s) + "," + s.status + "\n";
  }
  return out;
}

void emit_report(const EvalReport& report, const std::filesystem::path& dir) {
  write_text_file(dir / "report.json", report_to_json(report));
  write_text_file(dir / "report.csv", report_csv(report));
  write_text_file(dir / "sweep.csv", sweep_csv(report));
}

}  // namespace creditprint
