#include "mixvae/objective.hpp"

#include <cmath>
#include <string>

#include "mixvae/errors.hpp"
#include "mixvae/ops.hpp"

namespace mixvae {

void ObjectiveConfig::validate() const {
  if (!(recon_weight >= 0.0) || !(kl_weight >= 0.0) || !(supervised_weight >= 0.0)) {
    throw ConfigError("objective weights must be >= 0");
  }
  if (!(log_eps > 0.0 && log_eps < 1.0)) throw ConfigError("objective.log_eps must be in (0, 1)");
}

LossBreakdown LossTerms::values() const {
  return {recon.item(), kl.item(), supervised.item(), total.item()};
}

Tensor recon_mse(const Tensor& reconstruction, const Tensor& target) {
  if (reconstruction.shape() != target.shape()) {
    throw ShapeError("recon_mse: reconstruction " + shape_str(reconstruction.shape()) +
                     " vs target " + shape_str(target.shape()));
  }
  return mean(square(sub(reconstruction, target)));
}

Tensor kl_diag_gaussian(const LatentDistribution& dist) {
  if (dist.mu.shape() != dist.logvar.shape() || dist.mu.rank() != 2) {
    throw ShapeError("kl_diag_gaussian: mu " + shape_str(dist.mu.shape()) + " vs logvar " +
                     shape_str(dist.logvar.shape()));
  }
  // 0.5 * sum(mu^2 + exp(logvar) - 1 - logvar) / B
  const Tensor inner = sub(add(square(dist.mu), exp(dist.logvar)), add_scalar(dist.logvar, 1.0));
  return scale(sum(inner), 0.5 / static_cast<double>(dist.mu.dim(0)));
}

Tensor supervised_loss(const Tensor& probs, const Tensor& targets, SupervisedMode mode, double eps) {
  if (probs.shape() != targets.shape() || probs.rank() != 2) {
    throw ShapeError("supervised_loss: probs " + shape_str(probs.shape()) + " vs targets " +
                     shape_str(targets.shape()));
  }
  for (double t : targets.data()) {
    if (t < 0.0) throw ConfigError("supervised_loss: targets must be non-negative");
  }
  const double inv_batch = 1.0 / static_cast<double>(probs.dim(0));
  Tensor ll = sum(mul(targets, clamp_log(probs, eps)));
  if (mode == SupervisedMode::kBinary) {
    const Tensor not_t = add_scalar(scale(targets, -1.0), 1.0);
    const Tensor not_p = add_scalar(scale(probs, -1.0), 1.0);
    ll = add(ll, sum(mul(not_t, clamp_log(not_p, eps))));
  }
  return scale(ll, -inv_batch);
}

LossTerms total_loss(const ForwardOutput& forward, const Tensor& y_mixed,
                     const Tensor& recon_target_mixed, const ObjectiveConfig& config) {
  LossTerms t;
  const Tensor probs = config.supervised_mode == SupervisedMode::kBinary ? sigmoid(forward.logits)
                                                                         : forward.probs;
  t.supervised = supervised_loss(probs, y_mixed, config.supervised_mode, config.log_eps);
  if (forward.reconstruction.defined()) {
    if (!recon_target_mixed.defined()) throw UsageError("total_loss: missing reconstruction target");
    t.recon = recon_mse(forward.reconstruction, recon_target_mixed);
    t.kl = kl_diag_gaussian(forward.latent);
  } else {
    t.recon = Tensor::scalar(0.0);
    t.kl = Tensor::scalar(0.0);
  }
  t.total = add(add(scale(t.recon, config.recon_weight), scale(t.kl, config.kl_weight)),
                scale(t.supervised, config.supervised_weight));
  return t;
}

}  // namespace mixvae
