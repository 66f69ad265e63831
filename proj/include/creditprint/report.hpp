#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace creditprint {

struct VariantResult {
  std::string variant;
  std::uint64_t seed = 0;
  double auc = 0.0;  // NaN when the run failed
  std::size_t n_test = 0;
  double wall_time_s = 0.0;
  std::string status = "ok";  // "ok" or "failed"
  std::string error;
  std::string split_hash;
  std::map<std::string, double> diagnostics;

  friend bool operator==(const VariantResult&, const VariantResult&) = default;
};

struct SweepResult {
  std::size_t region_dim = 0;
  std::size_t trajectory_dim = 0;
  std::uint64_t seed = 0;
  double auc = 0.0;
  double wall_time_s = 0.0;
  std::string status = "ok";
  std::string error;

  friend bool operator==(const SweepResult&, const SweepResult&) = default;
};

// Published AUC figures obtained on a proprietary dataset under an unreported
// protocol. Carried along for comparison only.
struct ReferenceValue {
  std::string variant;
  double auc = 0.0;
  bool reproducible = false;
  std::string protocol = "unknown";
  std::string note;

  friend bool operator==(const ReferenceValue&, const ReferenceValue&) = default;
};

std::vector<ReferenceValue> published_references();

struct EvalReport {
  std::vector<VariantResult> results;
  std::vector<SweepResult> sweep;
  std::vector<ReferenceValue> references = published_references();

  // Mean AUC over successful runs of `variant`; NaN if there are none.
  double mean_auc(const std::string& variant) const;
  // Variant names in first-appearance order.
  std::vector<std::string> variants() const;

  friend bool operator==(const EvalReport&, const EvalReport&);
};

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
// variant,auc,seed,wall_time_s
std::string report_csv(const EvalReport& report);
// region_dim,trajectory_dim,seed,auc,wall_time_s,status
std::string sweep_csv(const EvalReport& report);

// Writes report.json, report.csv and sweep.csv into `dir`; throws IoError.
void emit_report(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace creditprint
