#include "mixvae/optim.hpp"

#include <cmath>
#include <string>

#include "mixvae/errors.hpp"

namespace mixvae {

void OptimConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("optim.lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("optim.momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("optim.weight_decay must be >= 0");
  if (!(grad_clip_norm >= 0.0)) throw ConfigError("optim.grad_clip_norm must be >= 0");
  if (batch_size == 0) throw ConfigError("optim.batch_size must be >= 1");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) {
    throw ConfigError("optim.plateau_factor must be in (0, 1)");
  }
  if (plateau_patience == 0) throw ConfigError("optim.plateau_patience must be >= 1");
  if (stage1_epochs + stage2_epochs == 0) throw ConfigError("optim: at least one epoch is required");
}

void sgd_update(std::span<double> param, std::span<const double> grad, std::span<double> velocity,
                const SgdHyper& h) {
  if (param.size() != grad.size() || param.size() != velocity.size()) {
    throw std::logic_error("sgd_update: parameter, gradient and velocity sizes differ (" +
                           std::to_string(param.size()) + ", " + std::to_string(grad.size()) + ", " +
                           std::to_string(velocity.size()) + ")");
  }
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i] + h.weight_decay * param[i];
    velocity[i] = h.momentum * velocity[i] + g;
    param[i] -= h.lr * (h.nesterov ? g + h.momentum * velocity[i] : velocity[i]);
  }
}

SgdOptimizer::SgdOptimizer(std::vector<Parameter>& params, const OptimConfig& config)
    : params_(&params), config_(config), lr_(config.lr) {
  config_.validate();
  velocity_.reserve(params.size());
  for (const auto& p : params) velocity_.emplace_back(p.value.numel(), 0.0);
}

double SgdOptimizer::step(std::span<const std::size_t> active) {
  double norm2 = 0.0;
  for (std::size_t i : active) {
    const Tensor& v = (*params_)[i].value;
    if (!v.has_grad()) continue;
    for (double g : v.grad()) norm2 += g * g;
  }
  const double norm = std::sqrt(norm2);
  const double clip = config_.grad_clip_norm > 0.0 && norm > config_.grad_clip_norm
                          ? config_.grad_clip_norm / norm
                          : 1.0;

  std::vector<double> g;
  for (std::size_t i : active) {
    Parameter& p = (*params_)[i];
    if (velocity_[i].size() != p.value.numel()) {
      throw std::logic_error("SgdOptimizer: velocity buffer for '" + p.name + "' has the wrong size");
    }
    const bool is_bias = p.value.rank() == 1;
    SgdHyper h{lr_, config_.momentum, config_.nesterov,
               (is_bias && !config_.decay_biases) ? 0.0 : config_.weight_decay};
    if (p.value.has_grad() && clip == 1.0) {
      sgd_update(p.value.mutable_data(), p.value.grad(), velocity_[i], h);
      continue;
    }
    g.assign(p.value.numel(), 0.0);
    if (p.value.has_grad()) {
      const auto src = p.value.grad();
      for (std::size_t k = 0; k < g.size(); ++k) g[k] = src[k] * clip;
    }
    sgd_update(p.value.mutable_data(), g, velocity_[i], h);
  }
  return norm;
}

void SgdOptimizer::zero_grad() {
  for (auto& p : *params_) p.value.zero_grad();
}

PlateauScheduler::PlateauScheduler(double initial_lr, double factor, std::size_t patience)
    : lr_(initial_lr), factor_(factor), patience_(patience) {
  if (!(initial_lr > 0.0)) throw ConfigError("scheduler: learning rate must be > 0");
  if (patience == 0) throw ConfigError("scheduler: patience must be >= 1");
}

double PlateauScheduler::step(double monitored) {
  if (monitored < best_) {
    best_ = monitored;
    bad_epochs_ = 0;
  } else if (++bad_epochs_ >= patience_) {
    lr_ *= factor_;
    bad_epochs_ = 0;
  }
  return lr_;
}

bool BestTracker::observe(std::size_t epoch, double accuracy) {
  if (accuracy > best_accuracy_) {
    best_accuracy_ = accuracy;
    best_epoch_ = epoch;
    return true;
  }
  return false;
}

}  // namespace mixvae
