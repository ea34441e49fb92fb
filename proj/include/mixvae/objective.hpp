#pragma once

#include "mixvae/model.hpp"
#include "mixvae/tensor.hpp"

namespace mixvae {

/// kCategorical: -(1/B) sum_n sum_c y log p over softmax probabilities.
/// kBinary: per-class sigmoid cross-entropy,
///   -(1/B) sum_n sum_c [y log p + (1 - y) log(1 - p)].
enum class SupervisedMode { kCategorical, kBinary };

struct ObjectiveConfig {
  double recon_weight = 1.0;
  double kl_weight = 1.0;
  double supervised_weight = 1.0;
  SupervisedMode supervised_mode = SupervisedMode::kCategorical;
  double log_eps = 1e-12;

  void validate() const;
};

struct LossBreakdown {
  double recon = 0.0;
  double kl = 0.0;
  double supervised = 0.0;
  double total = 0.0;
};

/// Scalar loss tensors for one batch; `total` is the one to differentiate.
struct LossTerms {
  Tensor recon;
  Tensor kl;
  Tensor supervised;
  Tensor total;

  LossBreakdown values() const;
};

/// Mean over all elements of (reconstruction - target)^2.
Tensor recon_mse(const Tensor& reconstruction, const Tensor& target);

/// KL(N(mu, diag(exp(logvar))) || N(0, I)), summed over latent dimensions and
/// averaged over the batch.
Tensor kl_diag_gaussian(const LatentDistribution& dist);

/// Cross-entropy against soft targets (rows of `targets` sum to 1). In
/// kBinary mode `probs` are per-class sigmoid probabilities.
Tensor supervised_loss(const Tensor& probs, const Tensor& targets,
                       SupervisedMode mode = SupervisedMode::kCategorical, double eps = 1e-12);

/// total = recon_weight * recon + kl_weight * kl + supervised_weight * supervised.
/// Models without a VAE branch contribute zero recon and kl.
LossTerms total_loss(const ForwardOutput& forward, const Tensor& y_mixed,
                     const Tensor& recon_target_mixed, const ObjectiveConfig& config = {});

}  // namespace mixvae
