#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mixvae/config.hpp"
#include "mixvae/dataset.hpp"
#include "mixvae/metrics.hpp"
#include "mixvae/trainer.hpp"

namespace mixvae {

/// Rng stream tags shared by every command so a config alone pins all randomness.
namespace streams {
inline constexpr std::uint64_t kSyntheticData = 0x73796e7468;
inline constexpr std::uint64_t kSplit = 0x73706c6974;
inline constexpr std::uint64_t kInit = 0x696e6974;
}  // namespace streams

struct RunData {
  Corpus corpus;
  SplitIndex split;
};

/// The corpus named by `config.data` (synthetic from the seed, or a manifest
/// on disk) and its train/validation split (from `data.split` when set,
/// otherwise stratified from the seed).
RunData load_run_data(const RunConfig& config);
Corpus load_data_corpus(const DataConfig& data, std::uint64_t seed);

/// `id,split` rows in corpus order, split being `train` or `val`.
std::string split_csv(const Corpus& corpus, const SplitIndex& split);
SplitIndex read_split_csv(const std::filesystem::path& path, const Corpus& corpus);

/// Fresh model for a config, initialized from the config's seed.
VaeClassifier init_model(const RunConfig& config);

struct ProbRow {
  std::string id;
  std::array<double, 4> p{};
  int truth = -1;
};

/// `id,p0,p1,p2,p3,truth` with probabilities in round-trip precision.
std::string probs_csv(const std::vector<ProbRow>& rows);
std::vector<ProbRow> read_probs_csv(const std::filesystem::path& path);

// Command bodies behind the CLI. Each writes fixed file names under `out`
// and throws (ConfigError, DataError, NonFiniteLossError) on failure.

struct SplitOptions {
  std::optional<std::filesystem::path> manifest;  // unset: synthetic data from the desk recipe
  std::optional<std::uint64_t> seed;
  double train_fraction = 0.8;
  std::filesystem::path out;
};
/// Writes <out>/split.csv.
void cmd_split(const SplitOptions& options);

struct TrainOptions {
  std::optional<std::filesystem::path> config;  // unset: desk recipe
  std::optional<std::uint64_t> seed;            // overrides the config seed
  std::filesystem::path out;
  bool verbose = false;
};
/// Writes curves.csv, losses.csv, checkpoint.bin (best epoch) and manifest.txt.
TrainResult cmd_train(const TrainOptions& options);

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> manifest;
  std::optional<std::filesystem::path> split;
  std::filesystem::path out;
};
/// Evaluates the validation split; writes report.json and probs.csv.
EvalReport cmd_eval(const EvalOptions& options);

struct EnsembleOptions {
  std::vector<std::filesystem::path> probs;
  std::optional<std::filesystem::path> truth;  // any CSV with id and truth columns
  std::filesystem::path out;
};
/// Averages aligned probability files; writes report.json and probs.csv.
EvalReport cmd_ensemble(const EnsembleOptions& options);

struct SynthOptions {
  std::size_t per_class = 200;
  std::size_t resolution = 32;
  std::uint64_t seed = 7;
  std::filesystem::path out;
};
/// Writes a synthetic corpus (PPM images, patches, manifest.csv) under `out`.
void cmd_synth(const SynthOptions& options);

/// Parses MIXVAE_SEED when it is set.
std::optional<std::uint64_t> seed_from_env();

}  // namespace mixvae
