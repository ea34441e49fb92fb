#pragma once

#include <cstddef>
#include <vector>

#include "mixvae/rng.hpp"
#include "mixvae/tensor.hpp"

namespace mixvae {

struct MixupConfig {
  bool enabled = true;
  double alpha = 1.0;
  /// Block boundaries where mixing may happen; 0 is input space. Empty means
  /// every boundary 0..num_blocks.
  std::vector<std::size_t> eligible_blocks;

  void validate(std::size_t num_blocks) const;
  std::vector<std::size_t> resolve_blocks(std::size_t num_blocks) const;
};

/// One mini-batch worth of mixing decisions: element i is mixed with
/// element permutation[i] using coefficient lambda, at boundary block_index.
struct MixupDraw {
  double lambda = 1.0;
  std::vector<std::size_t> permutation;
  std::size_t block_index = 0;

  static MixupDraw identity(std::size_t batch_size, std::size_t block_index = 0);
  bool is_noop() const;
};

/// lambda ~ Beta(alpha, alpha), then a uniform permutation, then a uniform
/// eligible block. Batches smaller than 2 get the identity draw and consume
/// nothing from `rng`.
MixupDraw sample_draw(const MixupConfig& config, std::size_t num_blocks, std::size_t batch_size,
                      Rng& rng);

/// lambda * a + (1 - lambda) * b, differentiable in both operands.
Tensor mix_tensors(const Tensor& a, const Tensor& b, double lambda);
/// Mixes a batch (axis 0) with its own permuted copy.
Tensor mix_batch(const Tensor& batch, const MixupDraw& draw);

struct MixedTargets {
  Tensor labels;          // [B,4], rows sum to 1
  Tensor reconstruction;  // [B,3,R,R]; undefined when no reconstruction target was given
};

/// Applies the draw's (lambda, permutation) to class targets and
/// reconstruction targets, exactly as the embedding was mixed.
MixedTargets mix_targets(const Tensor& y_onehot, const Tensor& recon_targets, const MixupDraw& draw);

}  // namespace mixvae
