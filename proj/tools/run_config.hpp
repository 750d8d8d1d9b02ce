#pragma once

// Resolved settings of one command-line run: every tunable of the library
// under a dotted key, loaded from key=value text and `--set` overrides.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "meshattn/fusion_net.hpp"
#include "meshattn/scanpath_rl.hpp"
#include "meshattn/synthetic.hpp"
#include "meshattn/unproject.hpp"

namespace meshattn::cli {

struct RunConfig {
  std::uint64_t seed = 0;
  FusionArch arch;
  TrainConfig train;
  Index predict_m = 2048;
  PpoConfig ppo;
  RewardConfig reward;
  UnprojectConfig unproject;
  SyntheticPixelFeatures pixels;  // also supplies alpha and timestep selection
  PlantedTaskConfig planted;

  /// Copies `seed` into every seeded sub-config.
  void propagate_seed();
};

struct ConfigKey {
  std::string key;
  std::string note;  // where the default comes from
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

const std::vector<ConfigKey>& config_keys();

/// InvalidArgument for an unknown key or a malformed value.
void set_value(RunConfig& config, const std::string& key, const std::string& value);
/// "key=value" form of set_value.
void apply_assignment(RunConfig& config, const std::string& assignment);

/// Lines of key=value; blank lines and lines starting with '#' skipped.
void load_config_file(RunConfig& config, const std::filesystem::path& path);

/// Every key with its resolved value, one per line, in registry order.
std::string format_config(const RunConfig& config);

}  // namespace meshattn::cli
