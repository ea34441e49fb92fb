#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mixvae/config.hpp"
#include "mixvae/model.hpp"
#include "mixvae/rng.hpp"

namespace mixvae {

/// Saved training state.
///
/// Binary layout, all integers and doubles little-endian:
///   "MIXVAECK"                 8-byte magic
///   u32 version (= 1)
///   str config                 resolved key=value listing
///   str rng_state
///   u64 epoch
///   f64 best_val_accuracy
///   u64 parameter count, then per parameter:
///     str name, u32 rank, u64 extents[rank], f64 values[product(extents)]
/// where `str` is a u64 byte length followed by the bytes.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  RunConfig config;
  std::vector<std::pair<std::string, Tensor>> parameters;
  std::string rng_state;
  std::uint64_t epoch = 0;
  double best_val_accuracy = 0.0;
};

/// Copies the model's current weights into a checkpoint.
Checkpoint make_checkpoint(const VaeClassifier& model, const RunConfig& config, const Rng& rng,
                           std::uint64_t epoch, double best_val_accuracy);

std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rebuilds the model described by the checkpoint's config and loads its weights.
VaeClassifier model_from_checkpoint(const Checkpoint& checkpoint);

}  // namespace mixvae
