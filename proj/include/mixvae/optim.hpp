#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mixvae/model.hpp"

namespace mixvae {

enum class PlateauMonitor { kValidationLoss, kTrainLoss };

struct OptimConfig {
  double lr = 0.01;
  double momentum = 0.9;
  bool nesterov = true;
  double weight_decay = 1e-4;
  bool decay_biases = true;
  /// Rescales the gradients of each step so their joint L2 norm is at most
  /// this value; 0 disables clipping.
  double grad_clip_norm = 0.0;
  std::size_t batch_size = 64;
  double plateau_factor = 0.1;
  std::size_t plateau_patience = 10;
  PlateauMonitor plateau_monitor = PlateauMonitor::kValidationLoss;
  std::size_t stage1_epochs = 30;
  std::size_t stage2_epochs = 50;

  void validate() const;
};

struct SgdHyper {
  double lr = 0.01;
  double momentum = 0.9;
  bool nesterov = true;
  double weight_decay = 0.0;
};

/// One SGD step on a flat parameter:
///   g = grad + weight_decay * p
///   v = momentum * v + g
///   p = p - lr * (g + momentum * v)   (nesterov)
///   p = p - lr * v                    (plain momentum)
void sgd_update(std::span<double> param, std::span<const double> grad, std::span<double> velocity,
                const SgdHyper& hyper);

/// Momentum SGD over a model's parameter list. Velocities start at zero and
/// persist for the optimizer's lifetime; only the parameters passed to step()
/// are touched, so frozen ones keep zero velocity until they are first updated.
class SgdOptimizer {
 public:
  SgdOptimizer(std::vector<Parameter>& params, const OptimConfig& config);

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

  /// Updates params[i] for each i in `active`, reading their accumulated grads.
  /// Returns the joint L2 norm of those grads before any clipping.
  double step(std::span<const std::size_t> active);
  void zero_grad();

  const std::vector<std::vector<double>>& velocities() const { return velocity_; }

 private:
  std::vector<Parameter>* params_;
  std::vector<std::vector<double>> velocity_;
  OptimConfig config_;
  double lr_;
};

/// Multiplies the learning rate by `factor` once the monitored value has
/// gone `patience` consecutive epochs without strictly improving on the best
/// seen so far; the counter then restarts (the best value is kept).
class PlateauScheduler {
 public:
  PlateauScheduler(double initial_lr, double factor, std::size_t patience);

  /// Feeds one epoch's monitored value and returns the learning rate to use next.
  double step(double monitored);
  double lr() const { return lr_; }
  double best() const { return best_; }
  std::size_t bad_epochs() const { return bad_epochs_; }

 private:
  double lr_;
  double factor_;
  std::size_t patience_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs_ = 0;
};

/// Tracks the epoch with the highest validation accuracy (first one wins ties).
class BestTracker {
 public:
  /// Returns true when `accuracy` is a new best.
  bool observe(std::size_t epoch, double accuracy);
  std::size_t best_epoch() const { return best_epoch_; }
  double best_accuracy() const { return best_accuracy_; }

 private:
  std::size_t best_epoch_ = 0;
  double best_accuracy_ = -1.0;
};

}  // namespace mixvae
