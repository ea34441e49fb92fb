#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "mixvae/commands.hpp"
#include "mixvae/errors.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kBadConfig = 2, kBadData = 3, kNonFinite = 4 };

}  // namespace

int main(int argc, char** argv) {
  using namespace mixvae;
  CLI::App app{"mixvae: VAE classifier with manifold mixup"};
  app.require_subcommand(1);

  SplitOptions split;
  std::string split_manifest, split_out;
  std::uint64_t split_seed = 0;
  auto* split_cmd = app.add_subcommand("split", "Write a stratified train/val split as id,split CSV");
  auto* split_manifest_opt = split_cmd->add_option("--manifest", split_manifest, "Corpus root with manifest.csv (default: synthetic desk data)");
  auto* split_seed_opt = split_cmd->add_option("--seed", split_seed, "Split seed");
  split_cmd->add_option("--train-fraction", split.train_fraction, "Fraction of each class sent to train")->capture_default_str();
  split_cmd->add_option("--out", split_out, "Output directory")->required();

  TrainOptions train;
  std::string train_config, train_out;
  auto* train_cmd = app.add_subcommand("train", "Train one model; writes curves.csv, losses.csv, checkpoint.bin, manifest.txt");
  auto* train_config_opt = train_cmd->add_option("--config", train_config, "key=value config file (default: desk recipe)");
  train_cmd->add_option("--out", train_out, "Output directory")->required();
  train_cmd->add_flag("-v,--verbose", train.verbose, "Print one progress line per epoch");

  EvalOptions eval;
  std::string eval_ck, eval_manifest, eval_split, eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on its validation split; writes report.json, probs.csv");
  eval_cmd->add_option("--checkpoint", eval_ck, "checkpoint.bin from train")->required();
  auto* eval_manifest_opt = eval_cmd->add_option("--manifest", eval_manifest, "Corpus root overriding the checkpoint's data");
  auto* eval_split_opt = eval_cmd->add_option("--split", eval_split, "Split CSV overriding the checkpoint's split");
  eval_cmd->add_option("--out", eval_out, "Output directory")->required();

  EnsembleOptions ens;
  std::vector<std::string> ens_probs;
  std::string ens_truth, ens_out;
  auto* ens_cmd = app.add_subcommand("ensemble", "Average probs.csv files and evaluate; writes report.json, probs.csv");
  ens_cmd->add_option("--probs", ens_probs, "Member probs.csv files")->required()->expected(1, -1);
  auto* ens_truth_opt = ens_cmd->add_option("--truth", ens_truth, "CSV with id and truth columns");
  ens_cmd->add_option("--out", ens_out, "Output directory")->required();

  SynthOptions synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic 4-class corpus to disk");
  synth_cmd->add_option("--per-class", synth.per_class, "Samples per class")->capture_default_str();
  synth_cmd->add_option("--resolution", synth.resolution, "Image side length")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const auto env_seed = seed_from_env();
    if (*split_cmd) {
      if (*split_manifest_opt) split.manifest = split_manifest;
      if (*split_seed_opt) split.seed = split_seed;
      else if (env_seed) split.seed = env_seed;
      split.out = split_out;
      cmd_split(split);
    } else if (*train_cmd) {
      if (*train_config_opt) train.config = train_config;
      train.seed = env_seed;
      train.out = train_out;
      const TrainResult r = cmd_train(train);
      std::cout << "best epoch " << r.best_epoch << " val_accuracy " << r.best_val_accuracy << '\n';
    } else if (*eval_cmd) {
      eval.checkpoint = eval_ck;
      if (*eval_manifest_opt) eval.manifest = eval_manifest;
      if (*eval_split_opt) eval.split = eval_split;
      eval.out = eval_out;
      const EvalReport r = cmd_eval(eval);
      std::cout << "accuracy " << r.accuracy << " weighted_f1 " << r.weighted_f1 << '\n';
    } else if (*ens_cmd) {
      for (const auto& p : ens_probs) ens.probs.emplace_back(p);
      if (*ens_truth_opt) ens.truth = ens_truth;
      ens.out = ens_out;
      const EvalReport r = cmd_ensemble(ens);
      std::cout << "accuracy " << r.accuracy << " weighted_f1 " << r.weighted_f1 << '\n';
    } else if (*synth_cmd) {
      synth.out = synth_out;
      cmd_synth(synth);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kBadConfig;
  } catch (const NonFiniteLossError& e) {
    std::cerr << "training aborted: " << e.what() << '\n';
    return kNonFinite;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kBadData;
  } catch (const ShapeError& e) {
    std::cerr << "shape error: " << e.what() << '\n';
    return kBadData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
