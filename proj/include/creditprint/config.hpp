#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "creditprint/harness.hpp"
#include "creditprint/synth.hpp"

namespace creditprint {

struct RunConfig {
  std::filesystem::path data_dir;  // empty: read from out_dir
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 1;
  SynthConfig synth;
  PipelineConfig pipeline;
  std::vector<std::uint64_t> eval_seeds;  // empty: {seed}
  bool sweep = false;

  // Range checks; throws ConfigError naming the key.
  void validate() const;
  // Propagates `seed` into the generator and every training component.
  void set_seed(std::uint64_t s);

  std::filesystem::path effective_data_dir() const { return data_dir.empty() ? out_dir : data_dir; }
  std::vector<std::uint64_t> effective_eval_seeds() const { return eval_seeds.empty() ? std::vector{seed} : eval_seeds; }

  // Every key with its resolved value.
  nlohmann::ordered_json to_json() const;
};

struct ConfigKeyInfo {
  std::string key;
  std::string default_value;
  std::string description;
};

const std::vector<ConfigKeyInfo>& config_keys();

// Sets one dotted key from its textual value; throws ConfigError.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);

// `key = value` lines; `#` starts a comment. Unknown keys and malformed
// values throw ConfigError. The result is validated.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

// One line per key: name, default, description.
std::string config_help();

}  // namespace creditprint
