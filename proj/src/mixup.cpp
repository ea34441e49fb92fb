#include "mixvae/mixup.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "mixvae/errors.hpp"
#include "mixvae/ops.hpp"

namespace mixvae {

void MixupConfig::validate(std::size_t num_blocks) const {
  if (!(alpha > 0.0)) throw ConfigError("mixup.alpha must be > 0");
  for (std::size_t b : eligible_blocks) {
    if (b > num_blocks) {
      throw ConfigError("mixup.eligible_blocks: block " + std::to_string(b) + " exceeds " +
                        std::to_string(num_blocks) + " encoder blocks");
    }
  }
}

std::vector<std::size_t> MixupConfig::resolve_blocks(std::size_t num_blocks) const {
  validate(num_blocks);
  std::vector<std::size_t> blocks = eligible_blocks;
  if (blocks.empty()) {
    blocks.resize(num_blocks + 1);
    std::iota(blocks.begin(), blocks.end(), std::size_t{0});
  }
  std::sort(blocks.begin(), blocks.end());
  blocks.erase(std::unique(blocks.begin(), blocks.end()), blocks.end());
  return blocks;
}

MixupDraw MixupDraw::identity(std::size_t batch_size, std::size_t block_index) {
  MixupDraw d;
  d.lambda = 1.0;
  d.permutation.resize(batch_size);
  std::iota(d.permutation.begin(), d.permutation.end(), std::size_t{0});
  d.block_index = block_index;
  return d;
}

bool MixupDraw::is_noop() const {
  if (lambda == 1.0) return true;
  for (std::size_t i = 0; i < permutation.size(); ++i) {
    if (permutation[i] != i) return false;
  }
  return true;
}

MixupDraw sample_draw(const MixupConfig& config, std::size_t num_blocks, std::size_t batch_size,
                      Rng& rng) {
  const auto blocks = config.resolve_blocks(num_blocks);
  if (batch_size < 2) return MixupDraw::identity(batch_size, blocks.front());
  MixupDraw d;
  d.lambda = rng.beta(config.alpha, config.alpha);
  d.permutation = rng.permutation(batch_size);
  d.block_index = blocks[rng.uniform_index(blocks.size())];
  return d;
}

Tensor mix_tensors(const Tensor& a, const Tensor& b, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ConfigError("mixup: lambda must lie in [0, 1], got " + std::to_string(lambda));
  }
  return lerp(a, b, lambda);
}

Tensor mix_batch(const Tensor& batch, const MixupDraw& draw) {
  if (batch.rank() == 0 || batch.dim(0) != draw.permutation.size()) {
    throw ShapeError("mixup: batch " + shape_str(batch.shape()) + " does not match a draw over " +
                     std::to_string(draw.permutation.size()) + " elements");
  }
  return mix_tensors(batch, gather_rows(batch, draw.permutation), draw.lambda);
}

MixedTargets mix_targets(const Tensor& y_onehot, const Tensor& recon_targets, const MixupDraw& draw) {
  MixedTargets out;
  out.labels = mix_batch(y_onehot, draw);
  if (recon_targets.defined()) out.reconstruction = mix_batch(recon_targets, draw);
  return out;
}

}  // namespace mixvae
