#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "creditprint/mobility.hpp"

namespace creditprint {

struct SynthConfig {
  std::uint64_t seed = 1;
  int users = 500;
  double low_credit_fraction = 0.3;
  int grid_rows = 12;
  int grid_cols = 12;
  double cell_km = 1.0;
  int days = 28;
  // How strongly a user's anchor regions follow the latent propensity
  // matching their label. 0 = no location signal.
  double signal_strength = 1.0;
  // Label-dependent shift in activity volume and wandering. 0 = identical
  // volume distributions for both classes.
  double manual_feature_signal = 0.0;

  // Throws ConfigError naming the offending key (synth.*).
  void validate() const;
};

struct SynthResult {
  Dataset dataset;
  // Per-region latent low-credit propensity in (0, 1), rank-uniform.
  std::vector<double> propensity;
};

// Pure function of the config.
//
// Each user draws home, work and leisure regions with weights
// exp(±k·β·(2p_r - 1)), the sign picked by the label, then walks between them
// one cell per recorded hour: work during 9-17 on weekdays, optional evening
// and weekend leisure, home otherwise. Recorded hours are sampled per user at
// a rate shared by both classes, so visit volume carries no label signal
// unless manual_feature_signal > 0.
SynthResult generate_synthetic(const SynthConfig& config);

// Dataset files plus synth_meta.json (config and propensities).
void write_synthetic(const SynthResult& result, const SynthConfig& config, const std::filesystem::path& dir);

inline constexpr const char* kSynthMetaFile = "synth_meta.json";

}  // namespace creditprint
