#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixvae/checkpoint.hpp"
#include "mixvae/config.hpp"
#include "mixvae/dataset.hpp"
#include "mixvae/model.hpp"
#include "mixvae/objective.hpp"
#include "mixvae/optim.hpp"

namespace mixvae {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  std::size_t stage = 1;
  double lr = 0.0;        // learning rate used during the epoch
  LossBreakdown train;
  LossBreakdown val;
  double val_accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> curves;
  Checkpoint best;  // weights from the epoch with the highest validation accuracy
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0.0;
};

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
};

/// One optimization step on a batch: forward (with the optional mixup draw),
/// combined loss, backward, SGD update of params[active], zero grads.
/// Throws NonFiniteLossError naming the term and `batch_index`.
LossBreakdown train_step(VaeClassifier& model, SgdOptimizer& optimizer, const Batch& batch,
                         std::span<const std::size_t> active, const std::optional<MixupDraw>& draw,
                         Rng& rng, const ObjectiveConfig& objective, std::size_t batch_index = 0);

struct SplitEvaluation {
  Tensor probs;  // [N,4] in loader order
  std::vector<int> labels;
  std::vector<std::size_t> sample_ids;
  LossBreakdown loss;  // per-sample average over the split
  double accuracy = 0.0;
};

/// Deterministic eval-mode pass (test transforms, no dropout, z = mu).
SplitEvaluation evaluate_split(const VaeClassifier& model, const Corpus& corpus,
                               const std::vector<std::size_t>& ids, const RunConfig& config);

/// Two-stage schedule: stage 1 trains only the heads and decoder with the
/// encoder frozen, stage 2 trains everything. After every epoch the
/// validation split is evaluated, the plateau scheduler is stepped, and the
/// best-accuracy weights are kept.
TrainResult train(VaeClassifier& model, const Corpus& corpus, const SplitIndex& split,
                  const RunConfig& config, const TrainHooks& hooks = {});

/// epoch,stage,lr,train_total,train_recon,train_kl,train_sup,val_total,val_accuracy
std::string curves_csv(std::span<const EpochRecord> curves);
/// epoch,recon,kl,supervised,total,split (one row per epoch and split)
std::string loss_terms_csv(std::span<const EpochRecord> curves);

/// Order-sensitive FNV-1a hash over the bit patterns of the given parameters.
std::uint64_t parameter_hash(const std::vector<Parameter>& params, std::span<const std::size_t> which);

}  // namespace mixvae
