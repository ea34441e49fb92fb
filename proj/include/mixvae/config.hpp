#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "mixvae/augment.hpp"
#include "mixvae/mixup.hpp"
#include "mixvae/model.hpp"
#include "mixvae/objective.hpp"
#include "mixvae/optim.hpp"

namespace mixvae {

struct DataConfig {
  bool synthetic = true;
  std::size_t synthetic_per_class = 200;
  std::size_t synthetic_resolution = 32;
  std::string manifest;  // corpus root containing manifest.csv (when not synthetic)
  std::string split;     // optional split CSV; empty means split from the seed
  double train_fraction = 0.8;
};

/// Every knob of a run. Serialized as flat `section.key=value` lines.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir;
  DataConfig data;
  AugmentConfig augment;
  ModelConfig model;
  MixupConfig mixup;
  ObjectiveConfig objective;
  OptimConfig optim;

  /// The scaled-down recipe used by the tests: 6 blocks at 32x32, synthetic
  /// 4-class data, stage1=5 / stage2=15 epochs, batch 32, mixup alpha 1.0,
  /// gradient norm clipped at 5.
  static RunConfig desk();
  /// Full-resolution recipe (224 crops from 256 resizes, 30 + 50 epochs, batch 64).
  static RunConfig paper_recipe();

  /// Cross-module consistency checks; throws ConfigError naming the key.
  void validate() const;
};

using KeyValues = std::map<std::string, std::string>;

/// Parses `key=value` lines ('#' starts a comment). Duplicate keys are rejected.
KeyValues parse_key_values(const std::string& text);

/// Starts from the desk recipe (or from `model.preset` / `base=paper` when
/// given) and applies every key. Unknown keys or bad values throw
/// ConfigError naming the key.
RunConfig config_from_key_values(const KeyValues& kv);
RunConfig load_config(const std::filesystem::path& path);

/// Fully resolved `key=value` listing, sorted by key, that round-trips
/// through config_from_key_values.
std::string to_key_values(const RunConfig& config);

}  // namespace mixvae
