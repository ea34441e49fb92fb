#include "mixvae/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mixvae/errors.hpp"

namespace mixvae {

namespace {

constexpr double kReluGain = 1.4142135623730951;

std::size_t downsampled(std::size_t extent) { return (extent + 1) / 2; }

ModelConfig stage_preset(const std::vector<std::size_t>& widths,
                         const std::vector<std::size_t>& repeats,
                         const std::vector<std::size_t>& strided_stages, double dropout) {
  ModelConfig c;
  for (std::size_t s = 0; s < widths.size(); ++s) {
    const bool strided =
        std::find(strided_stages.begin(), strided_stages.end(), s) != strided_stages.end();
    if (strided) c.downsample_blocks.push_back(c.channels.size());
    for (std::size_t r = 0; r < repeats[s]; ++r) c.channels.push_back(widths[s]);
  }
  c.dropout_p = dropout;
  return c;
}

}  // namespace

void ModelConfig::validate() const {
  if (channels.empty()) throw ConfigError("model.channels: at least one encoder block is required");
  for (std::size_t c : channels) {
    if (c == 0) throw ConfigError("model.channels: block widths must be >= 1");
  }
  for (std::size_t b : downsample_blocks) {
    if (b >= channels.size()) {
      throw ConfigError("model.downsample_blocks: block " + std::to_string(b) + " out of range");
    }
  }
  if (input_resolution == 0) throw ConfigError("model.input_resolution must be >= 1");
  if (latent_dim == 0) throw ConfigError("model.latent_dim must be >= 1");
  if (num_classes != kNumClasses) throw ConfigError("model.num_classes must be 4");
  if (decoder_layers != kDecoderLayers) throw ConfigError("model.decoder_layers must be 5");
  if (classifier_hidden == 0) throw ConfigError("model.classifier_hidden must be >= 1");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("model.dropout_p must be in [0, 1)");
  if (decoder_channels.size() != kDecoderLayers - 1) {
    throw ConfigError("model.decoder_channels needs one width per upsample stage (4)");
  }
  for (std::size_t c : decoder_channels) {
    if (c == 0) throw ConfigError("model.decoder_channels: widths must be >= 1");
  }
  if (recon_resolution < 16 || recon_resolution % 16 != 0) {
    throw ConfigError("model.recon_resolution must be a positive multiple of 16");
  }
}

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.input_resolution = 32;
  c.channels = {8, 16, 16, 32, 32, 32};
  c.downsample_blocks = {1, 3, 5};
  c.latent_dim = 16;
  c.dropout_p = 0.3;
  c.decoder_channels = {32, 16, 16, 8};
  c.recon_resolution = 16;
  return c;
}

ModelConfig ModelConfig::b3_like() {
  return stage_preset({24, 32, 48, 96, 136, 232, 384}, {3, 4, 4, 6, 6, 7, 3}, {0, 1, 2, 3, 5}, 0.3);
}

ModelConfig ModelConfig::b4_like() {
  return stage_preset({24, 32, 56, 112, 160, 272, 448}, {2, 3, 3, 5, 5, 6, 3}, {0, 1, 2, 3, 5}, 0.4);
}

VaeClassifier::VaeClassifier(ModelConfig config, Rng& init) : config_(std::move(config)) {
  config_.validate();
  std::size_t in_ch = 3;
  for (std::size_t i = 0; i < config_.num_blocks(); ++i) {
    const std::size_t out_ch = config_.channels[i];
    const bool strided = std::find(config_.downsample_blocks.begin(), config_.downsample_blocks.end(),
                                   i) != config_.downsample_blocks.end();
    const std::string prefix = "encoder.block" + std::to_string(i);
    Block b;
    b.weight = add_param(prefix + ".weight", {out_ch, in_ch, 3, 3}, ParamGroup::kEncoder, in_ch * 9,
                         kReluGain, init);
    b.bias = add_param(prefix + ".bias", {out_ch}, ParamGroup::kEncoder, 0, 0.0, init);
    b.stride = strided ? 2 : 1;
    blocks_.push_back(b);
    in_ch = out_ch;
  }
  const std::size_t feat = in_ch;
  const auto head = ParamGroup::kHeadsAndDecoder;

  if (config_.vae) {
    const std::size_t L = config_.latent_dim;
    mu_w_ = add_param("latent.mu.weight", {feat, L}, head, feat, 1.0, init);
    mu_b_ = add_param("latent.mu.bias", {L}, head, 0, 0.0, init);
    logvar_w_ = add_param("latent.logvar.weight", {feat, L}, head, feat, 1.0, init);
    logvar_b_ = add_param("latent.logvar.bias", {L}, head, 0, 0.0, init);

    const auto& dc = config_.decoder_channels;
    const std::size_t base = config_.recon_resolution / 16;
    dec_fc_w_ = add_param("decoder.fc.weight", {L, dc[0] * base * base}, head, L, kReluGain, init);
    dec_fc_b_ = add_param("decoder.fc.bias", {dc[0] * base * base}, head, 0, 0.0, init);
    for (std::size_t s = 0; s < 4; ++s) {
      const std::size_t cin = dc[s];
      const std::size_t cout = s + 1 < 4 ? dc[s + 1] : 3;
      const std::string prefix = "decoder.conv" + std::to_string(s + 1);
      dec_conv_w_.push_back(add_param(prefix + ".weight", {cout, cin, 3, 3}, head, cin * 9,
                                      s + 1 < 4 ? kReluGain : 1.0, init));
      dec_conv_b_.push_back(add_param(prefix + ".bias", {cout}, head, 0, 0.0, init));
    }
  }

  const std::size_t hidden = config_.classifier_hidden;
  fc1_w_ = add_param("classifier.fc1.weight", {feat, hidden}, head, feat, kReluGain, init);
  fc1_b_ = add_param("classifier.fc1.bias", {hidden}, head, 0, 0.0, init);
  fc2_w_ = add_param("classifier.fc2.weight", {hidden, config_.num_classes}, head, hidden, 1.0, init);
  fc2_b_ = add_param("classifier.fc2.bias", {config_.num_classes}, head, 0, 0.0, init);
}

std::size_t VaeClassifier::add_param(std::string name, Shape shape, ParamGroup group,
                                     std::size_t fan_in, double gain, Rng& init) {
  std::vector<double> values(shape_numel(shape), 0.0);
  if (fan_in > 0) {
    // Uniform with variance gain^2 / fan_in.
    const double bound = gain * std::sqrt(3.0 / static_cast<double>(fan_in));
    for (double& v : values) v = init.uniform(-bound, bound);
  }
  params_.push_back({std::move(name), Tensor::from(std::move(shape), std::move(values), true), group});
  return params_.size() - 1;
}

std::size_t VaeClassifier::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

ParameterGroups VaeClassifier::parameter_groups() const {
  ParameterGroups g;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    (params_[i].group == ParamGroup::kEncoder ? g.encoder : g.heads_and_decoder).push_back(i);
  }
  return g;
}

void VaeClassifier::set_encoder_frozen(bool frozen) {
  for (auto& p : params_) {
    if (p.group == ParamGroup::kEncoder) p.value.set_requires_grad(!frozen);
  }
}

const Parameter& VaeClassifier::parameter(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p;
  }
  throw UsageError("no parameter named " + name);
}

Shape VaeClassifier::embedding_shape(std::size_t k) const {
  if (k > config_.num_blocks()) {
    throw ShapeError("block boundary " + std::to_string(k) + " exceeds " +
                     std::to_string(config_.num_blocks()) + " blocks");
  }
  std::size_t h = config_.input_resolution, w = config_.input_resolution, c = 3;
  for (std::size_t i = 0; i < k; ++i) {
    if (blocks_[i].stride == 2) {
      h = downsampled(h);
      w = downsampled(w);
    }
    c = config_.channels[i];
  }
  return {c, h, w};
}

Tensor VaeClassifier::encode_blocks(const Tensor& x, std::size_t start_block,
                                    std::size_t end_block) const {
  if (start_block > end_block || end_block > config_.num_blocks()) {
    throw ShapeError("encode_blocks: invalid block range [" + std::to_string(start_block) + ", " +
                     std::to_string(end_block) + ")");
  }
  const Shape expected = embedding_shape(start_block);
  if (x.rank() != 4 || Shape(x.shape().begin() + 1, x.shape().end()) != expected) {
    throw ShapeError("encode_blocks: embedding " + shape_str(x.shape()) + " does not match block " +
                     std::to_string(start_block) + " extents [B," + shape_str(expected).substr(1));
  }
  Tensor h = x;
  for (std::size_t i = start_block; i < end_block; ++i) {
    const Block& b = blocks_[i];
    h = relu(conv2d(h, p(b.weight), p(b.bias), b.stride, 1));
  }
  return h;
}

LatentDistribution VaeClassifier::latent_head(const Tensor& pooled) const {
  if (!config_.vae) throw UsageError("latent_head: model was built without the VAE branch");
  return {dense(pooled, p(mu_w_), p(mu_b_)), dense(pooled, p(logvar_w_), p(logvar_b_))};
}

Tensor VaeClassifier::decode(const Tensor& z) const {
  if (!config_.vae) throw UsageError("decode: model was built without the VAE branch");
  if (z.rank() != 2 || z.dim(1) != config_.latent_dim) {
    throw ShapeError("decode: latent " + shape_str(z.shape()) + " expected [B," +
                     std::to_string(config_.latent_dim) + "]");
  }
  const std::size_t base = config_.recon_resolution / 16;
  Tensor h = relu(dense(z, p(dec_fc_w_), p(dec_fc_b_)));
  h = h.reshape({z.dim(0), config_.decoder_channels[0], base, base});
  for (std::size_t s = 0; s < 4; ++s) {
    h = conv2d(upsample_nearest2d(h, 2), p(dec_conv_w_[s]), p(dec_conv_b_[s]), 1, 1);
    h = s + 1 < 4 ? relu(h) : sigmoid(h);
  }
  return h;
}

Tensor VaeClassifier::classify(const Tensor& pooled, Mode mode, Rng& rng) const {
  Tensor h = relu(dense(pooled, p(fc1_w_), p(fc1_b_)));
  h = dropout(h, config_.dropout_p, mode, rng);
  return dense(h, p(fc2_w_), p(fc2_b_));
}

ForwardOutput VaeClassifier::forward(const Tensor& x, Mode mode, Rng& rng,
                                     const std::optional<MixupDraw>& mixup) const {
  if (mixup && mode != Mode::kTrain) throw UsageError("forward: mixup is only valid in train mode");
  const std::size_t n = config_.num_blocks();
  Tensor h;
  if (mixup) {
    const std::size_t k = mixup->block_index;
    if (k > n) throw ShapeError("forward: mixup block " + std::to_string(k) + " out of range");
    h = encode_blocks(mix_batch(encode_blocks(x, 0, k), *mixup), k, n);
  } else {
    h = encode_blocks(x, 0, n);
  }
  const Tensor pooled = global_avg_pool(h);

  ForwardOutput out;
  out.logits = classify(pooled, mode, rng);
  out.probs = softmax(out.logits);
  if (config_.vae) {
    out.latent = latent_head(pooled);
    out.z = mode == Mode::kTrain ? reparameterize(out.latent, rng) : out.latent.mu;
    out.reconstruction = decode(out.z);
  }
  return out;
}

void VaeClassifier::load_parameters(const std::vector<std::pair<std::string, Tensor>>& values) {
  if (values.size() != params_.size()) {
    throw ShapeError("checkpoint holds " + std::to_string(values.size()) +
                     " parameter tensors, model expects " + std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& [name, t] = values[i];
    if (name != params_[i].name) {
      throw ShapeError("parameter " + std::to_string(i) + ": checkpoint has '" + name +
                       "', model expects '" + params_[i].name + "'");
    }
    if (t.shape() != params_[i].value.shape()) {
      throw ShapeError("parameter '" + name + "': checkpoint shape " + shape_str(t.shape()) +
                       " vs model shape " + shape_str(params_[i].value.shape()));
    }
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto dst = params_[i].value.mutable_data();
    auto src = values[i].second.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

Tensor reparameterize(const LatentDistribution& dist, Rng& rng) {
  std::vector<double> eps(dist.mu.numel());
  for (double& e : eps) e = rng.normal();
  return reparameterize(dist, Tensor::from(dist.mu.shape(), std::move(eps)));
}

Tensor reparameterize(const LatentDistribution& dist, const Tensor& eps) {
  if (dist.mu.shape() != dist.logvar.shape() || dist.mu.shape() != eps.shape()) {
    throw ShapeError("reparameterize: mu " + shape_str(dist.mu.shape()) + ", logvar " +
                     shape_str(dist.logvar.shape()) + ", eps " + shape_str(eps.shape()));
  }
  return add(dist.mu, mul(exp(scale(dist.logvar, 0.5)), eps.detach()));
}

}  // namespace mixvae
