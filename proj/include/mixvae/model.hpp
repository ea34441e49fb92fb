#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mixvae/mixup.hpp"
#include "mixvae/ops.hpp"
#include "mixvae/rng.hpp"
#include "mixvae/tensor.hpp"

namespace mixvae {

inline constexpr std::size_t kNumClasses = 4;
inline constexpr std::size_t kDecoderLayers = 5;

struct ModelConfig {
  std::size_t input_resolution = 224;
  /// Output channels of each encoder block; its length is the block count.
  std::vector<std::size_t> channels;
  /// Blocks (0-based) whose convolution uses stride 2.
  std::vector<std::size_t> downsample_blocks;
  std::size_t latent_dim = 128;
  std::size_t num_classes = kNumClasses;
  std::size_t classifier_hidden = 512;
  double dropout_p = 0.3;
  std::size_t decoder_layers = kDecoderLayers;
  /// Channels entering each of the four upsample-conv decoder stages.
  std::vector<std::size_t> decoder_channels{64, 32, 16, 8};
  std::size_t recon_resolution = 64;
  /// false builds the plain classifier: no latent head, no decoder.
  bool vae = true;

  std::size_t num_blocks() const { return channels.size(); }
  void validate() const;

  /// 6 blocks at 32x32, latent 16: the configuration the test suites train.
  static ModelConfig desk();
  /// 33 blocks, dropout 0.3 (B3 block count).
  static ModelConfig b3_like();
  /// 27 blocks, dropout 0.4 (B4 block count).
  static ModelConfig b4_like();
};

enum class ParamGroup { kEncoder, kHeadsAndDecoder };

struct Parameter {
  std::string name;
  Tensor value;
  ParamGroup group;
};

struct LatentDistribution {
  Tensor mu;      // [B, latent_dim]
  Tensor logvar;  // [B, latent_dim]
};

struct ForwardOutput {
  Tensor logits;  // [B, 4]
  Tensor probs;   // softmax(logits)
  LatentDistribution latent;  // undefined members when the model has no VAE branch
  Tensor z;
  Tensor reconstruction;  // [B, 3, R, R]
};

struct ParameterGroups {
  std::vector<std::size_t> encoder;
  std::vector<std::size_t> heads_and_decoder;
};

/// Convolutional VAE-classifier.
///
/// x -> encoder blocks -> global average pool -> {classifier head, latent head}
/// and z ~ q(z|x) -> decoder -> reconstruction in (0, 1). Every block boundary
/// k in [0, num_blocks] is addressable, which is where mixup is inserted.
class VaeClassifier {
 public:
  /// Initializes weights with fan-in scaled uniform draws from `init`, zero biases.
  VaeClassifier(ModelConfig config, Rng& init);

  const ModelConfig& config() const { return config_; }
  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::size_t parameter_count() const;
  ParameterGroups parameter_groups() const;
  /// Toggles requires_grad on the encoder group.
  void set_encoder_frozen(bool frozen);
  const Parameter& parameter(const std::string& name) const;

  /// Per-sample extents [C,H,W] of the embedding at block boundary k.
  Shape embedding_shape(std::size_t k) const;
  /// Runs blocks [start_block, end_block) on an embedding taken at start_block.
  Tensor encode_blocks(const Tensor& x, std::size_t start_block, std::size_t end_block) const;
  LatentDistribution latent_head(const Tensor& pooled) const;
  Tensor decode(const Tensor& z) const;
  Tensor classify(const Tensor& pooled, Mode mode, Rng& rng) const;

  /// Train mode samples z by reparameterization; eval mode uses z = mu and
  /// disables dropout, so it is deterministic and leaves `rng` untouched.
  /// A mixup draw is only accepted in train mode.
  ForwardOutput forward(const Tensor& x, Mode mode, Rng& rng,
                        const std::optional<MixupDraw>& mixup = std::nullopt) const;

  /// Replaces all weights; names and shapes must match exactly.
  void load_parameters(const std::vector<std::pair<std::string, Tensor>>& values);

 private:
  struct Block {
    std::size_t weight, bias;
    std::size_t stride;
  };

  std::size_t add_param(std::string name, Shape shape, ParamGroup group, std::size_t fan_in,
                        double gain, Rng& init);
  const Tensor& p(std::size_t index) const { return params_[index].value; }

  ModelConfig config_;
  std::vector<Parameter> params_;
  std::vector<Block> blocks_;
  std::size_t mu_w_ = 0, mu_b_ = 0, logvar_w_ = 0, logvar_b_ = 0;
  std::size_t dec_fc_w_ = 0, dec_fc_b_ = 0;
  std::vector<std::size_t> dec_conv_w_, dec_conv_b_;
  std::size_t fc1_w_ = 0, fc1_b_ = 0, fc2_w_ = 0, fc2_b_ = 0;
};

/// z = mu + exp(0.5 * logvar) * eps with eps ~ N(0, I) drawn from `rng`.
Tensor reparameterize(const LatentDistribution& dist, Rng& rng);
/// Same with a caller-supplied (constant) eps.
Tensor reparameterize(const LatentDistribution& dist, const Tensor& eps);

}  // namespace mixvae
