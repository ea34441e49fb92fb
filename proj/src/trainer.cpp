#include "mixvae/trainer.hpp"

#include <bit>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mixvae/csv.hpp"
#include "mixvae/errors.hpp"
#include "mixvae/metrics.hpp"

namespace mixvae {

namespace {

void check_finite(const LossBreakdown& l, std::size_t batch_index, const char* phase) {
  const std::pair<const char*, double> terms[] = {
      {"recon", l.recon}, {"kl", l.kl}, {"supervised", l.supervised}, {"total", l.total}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v)) {
      throw NonFiniteLossError(std::string("non-finite ") + name + " loss (" + std::to_string(v) +
                               ") in " + phase + " batch " + std::to_string(batch_index));
    }
  }
}

void accumulate(LossBreakdown& acc, const LossBreakdown& l, double weight) {
  acc.recon += weight * l.recon;
  acc.kl += weight * l.kl;
  acc.supervised += weight * l.supervised;
  acc.total += weight * l.total;
}

LossBreakdown scaled(LossBreakdown l, double s) {
  l.recon *= s;
  l.kl *= s;
  l.supervised *= s;
  l.total *= s;
  return l;
}

}  // namespace

LossBreakdown train_step(VaeClassifier& model, SgdOptimizer& optimizer, const Batch& batch,
                         std::span<const std::size_t> active, const std::optional<MixupDraw>& draw,
                         Rng& rng, const ObjectiveConfig& objective, std::size_t batch_index) {
  const ForwardOutput out = model.forward(batch.x, Mode::kTrain, rng, draw);
  Tensor y = batch.y_onehot;
  Tensor recon_target = model.config().vae ? batch.patch_target : Tensor();
  if (draw) {
    MixedTargets mixed = mix_targets(y, recon_target, *draw);
    y = mixed.labels;
    recon_target = mixed.reconstruction;
  }
  const LossTerms terms = total_loss(out, y, recon_target, objective);
  const LossBreakdown values = terms.values();
  check_finite(values, batch_index, "training");
  if (terms.total.requires_grad()) terms.total.backward();
  optimizer.step(active);
  optimizer.zero_grad();
  return values;
}

SplitEvaluation evaluate_split(const VaeClassifier& model, const Corpus& corpus,
                               const std::vector<std::size_t>& ids, const RunConfig& config) {
  NoGradGuard no_grad;
  BatchLoader loader(corpus, ids, config.optim.batch_size, Mode::kEval, config.augment,
                     config.model.recon_resolution, config.seed, 0);
  SplitEvaluation ev;
  std::vector<double> probs;
  probs.reserve(ids.size() * 4);
  Rng unused(0);
  for (std::size_t b = 0; b < loader.num_batches(); ++b) {
    const Batch batch = loader.batch(b);
    const ForwardOutput out = model.forward(batch.x, Mode::kEval, unused);
    const LossTerms terms = total_loss(out, batch.y_onehot,
                                       model.config().vae ? batch.patch_target : Tensor(),
                                       config.objective);
    const LossBreakdown l = terms.values();
    check_finite(l, b, "validation");
    accumulate(ev.loss, l, static_cast<double>(batch.size()));
    probs.insert(probs.end(), out.probs.data().begin(), out.probs.data().end());
    ev.labels.insert(ev.labels.end(), batch.labels.begin(), batch.labels.end());
    ev.sample_ids.insert(ev.sample_ids.end(), batch.sample_ids.begin(), batch.sample_ids.end());
  }
  if (ids.empty()) throw DataError("evaluate_split: empty split");
  ev.loss = scaled(ev.loss, 1.0 / static_cast<double>(ids.size()));
  ev.probs = Tensor::from({ids.size(), 4}, std::move(probs));
  ev.accuracy = evaluate(ev.probs, ev.labels).accuracy;
  return ev;
}

TrainResult train(VaeClassifier& model, const Corpus& corpus, const SplitIndex& split,
                  const RunConfig& config, const TrainHooks& hooks) {
  config.validate();
  if (split.train_ids.empty() || split.val_ids.empty()) throw DataError("train: empty train or validation split");
  const OptimConfig& oc = config.optim;
  SgdOptimizer optimizer(model.parameters(), oc);
  PlateauScheduler scheduler(oc.lr, oc.plateau_factor, oc.plateau_patience);
  BestTracker best;
  Rng rng = Rng::derive(config.seed, {0x747261696eULL});

  const ParameterGroups groups = model.parameter_groups();
  std::vector<std::size_t> all(model.parameters().size());
  std::iota(all.begin(), all.end(), std::size_t{0});

  TrainResult result;
  const std::size_t total_epochs = oc.stage1_epochs + oc.stage2_epochs;
  for (std::size_t epoch = 1; epoch <= total_epochs; ++epoch) {
    const bool stage1 = epoch <= oc.stage1_epochs;
    model.set_encoder_frozen(stage1);
    const std::vector<std::size_t>& active = stage1 ? groups.heads_and_decoder : all;

    EpochRecord rec;
    rec.epoch = epoch;
    rec.stage = stage1 ? 1 : 2;
    rec.lr = optimizer.lr();

    BatchLoader loader(corpus, split.train_ids, oc.batch_size, Mode::kTrain, config.augment,
                       config.model.recon_resolution, config.seed, epoch);
    for (std::size_t b = 0; b < loader.num_batches(); ++b) {
      const Batch batch = loader.batch(b);
      std::optional<MixupDraw> draw;
      if (config.mixup.enabled) {
        draw = sample_draw(config.mixup, model.config().num_blocks(), batch.size(), rng);
      }
      const LossBreakdown l =
          train_step(model, optimizer, batch, active, draw, rng, config.objective, b);
      accumulate(rec.train, l, static_cast<double>(batch.size()));
    }
    rec.train = scaled(rec.train, 1.0 / static_cast<double>(loader.num_samples()));

    const SplitEvaluation val = evaluate_split(model, corpus, split.val_ids, config);
    rec.val = val.loss;
    rec.val_accuracy = val.accuracy;

    const double monitored =
        oc.plateau_monitor == PlateauMonitor::kValidationLoss ? rec.val.total : rec.train.total;
    optimizer.set_lr(scheduler.step(monitored));

    if (best.observe(epoch, rec.val_accuracy)) {
      result.best = make_checkpoint(model, config, rng, epoch, rec.val_accuracy);
    }
    result.curves.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
  }
  model.set_encoder_frozen(false);
  result.best_epoch = best.best_epoch();
  result.best_val_accuracy = best.best_accuracy();
  return result;
}

std::string curves_csv(std::span<const EpochRecord> curves) {
  std::ostringstream os;
  os << "epoch,stage,lr,train_total,train_recon,train_kl,train_sup,val_total,val_accuracy\n";
  for (const auto& r : curves) {
    os << r.epoch << ',' << r.stage << ',' << csv::exact(r.lr) << ',' << csv::exact(r.train.total)
       << ',' << csv::exact(r.train.recon) << ',' << csv::exact(r.train.kl) << ','
       << csv::exact(r.train.supervised) << ',' << csv::exact(r.val.total) << ','
       << csv::fixed(r.val_accuracy, 6) << '\n';
  }
  return os.str();
}

std::string loss_terms_csv(std::span<const EpochRecord> curves) {
  std::ostringstream os;
  os << "epoch,recon,kl,supervised,total,split\n";
  for (const auto& r : curves) {
    for (const auto& [l, name] : {std::pair{r.train, "train"}, std::pair{r.val, "val"}}) {
      os << r.epoch << ',' << csv::exact(l.recon) << ',' << csv::exact(l.kl) << ','
         << csv::exact(l.supervised) << ',' << csv::exact(l.total) << ',' << name << '\n';
    }
  }
  return os.str();
}

std::uint64_t parameter_hash(const std::vector<Parameter>& params, std::span<const std::size_t> which) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto eat = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (std::size_t i : which) {
    for (double v : params[i].value.data()) eat(std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

}  // namespace mixvae
