#include "mixvae/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "mixvae/checkpoint.hpp"
#include "mixvae/csv.hpp"
#include "mixvae/errors.hpp"

namespace mixvae {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw DataError(where + ": bad number '" + s + "'");
  return v;
}

int parse_label(const std::string& s, const std::string& where) {
  int v = -1;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v < 0 || v > 3) {
    throw DataError(where + ": bad class label '" + s + "'");
  }
  return v;
}

std::vector<ProbRow> prob_rows(const Corpus& corpus, const SplitEvaluation& ev) {
  std::vector<ProbRow> rows(ev.sample_ids.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].id = corpus.samples[ev.sample_ids[i]].id;
    for (std::size_t c = 0; c < 4; ++c) rows[i].p[c] = ev.probs.data()[i * 4 + c];
    rows[i].truth = ev.labels[i];
  }
  return rows;
}

Tensor rows_to_tensor(const std::vector<ProbRow>& rows) {
  std::vector<double> v;
  v.reserve(rows.size() * 4);
  for (const auto& r : rows) v.insert(v.end(), r.p.begin(), r.p.end());
  return Tensor::from({rows.size(), 4}, std::move(v));
}

}  // namespace

Corpus load_data_corpus(const DataConfig& data, std::uint64_t seed) {
  if (data.synthetic) {
    Rng rng = Rng::derive(seed, {streams::kSyntheticData});
    return synthetic_dataset(data.synthetic_per_class, data.synthetic_resolution, rng);
  }
  if (data.manifest.empty()) throw ConfigError("data.manifest must be set when data.synthetic=false");
  const auto rows = load_manifest(data.manifest);
  return load_corpus(rows);
}

RunData load_run_data(const RunConfig& config) {
  RunData d;
  d.corpus = load_data_corpus(config.data, config.seed);
  if (!config.data.split.empty()) {
    d.split = read_split_csv(config.data.split, d.corpus);
  } else {
    Rng rng = Rng::derive(config.seed, {streams::kSplit});
    d.split = stratified_split(d.corpus.labels(), config.data.train_fraction, rng);
  }
  return d;
}

std::string split_csv(const Corpus& corpus, const SplitIndex& split) {
  std::vector<const char*> tag(corpus.samples.size(), nullptr);
  for (std::size_t i : split.train_ids) tag.at(i) = "train";
  for (std::size_t i : split.val_ids) tag.at(i) = "val";
  std::string out = "id,split\n";
  for (std::size_t i = 0; i < tag.size(); ++i) {
    if (tag[i] == nullptr) continue;
    out += corpus.samples[i].id;
    out += ',';
    out += tag[i];
    out += '\n';
  }
  return out;
}

SplitIndex read_split_csv(const fs::path& path, const Corpus& corpus) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) index.emplace(corpus.samples[i].id, i);
  const auto lines = csv::read_lines(path.string());
  if (lines.empty() || csv::split_line(lines[0]) != std::vector<std::string>{"id", "split"}) {
    throw DataError(path.string() + ": header must be id,split");
  }
  SplitIndex split;
  std::set<std::size_t> seen;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    if (lines[n].empty()) continue;
    const auto f = csv::split_line(lines[n]);
    const std::string where = path.string() + ":" + std::to_string(n + 1);
    if (f.size() != 2) throw DataError(where + ": expected 2 fields");
    const auto it = index.find(f[0]);
    if (it == index.end()) throw DataError(where + ": unknown sample id '" + f[0] + "'");
    if (!seen.insert(it->second).second) throw DataError(where + ": duplicate sample id '" + f[0] + "'");
    if (f[1] == "train") split.train_ids.push_back(it->second);
    else if (f[1] == "val") split.val_ids.push_back(it->second);
    else throw DataError(where + ": split must be train or val, got '" + f[1] + "'");
  }
  std::sort(split.train_ids.begin(), split.train_ids.end());
  std::sort(split.val_ids.begin(), split.val_ids.end());
  return split;
}

VaeClassifier init_model(const RunConfig& config) {
  Rng rng = Rng::derive(config.seed, {streams::kInit});
  return VaeClassifier(config.model, rng);
}

std::string probs_csv(const std::vector<ProbRow>& rows) {
  std::string out = "id,p0,p1,p2,p3,truth\n";
  for (const auto& r : rows) {
    out += r.id;
    for (double p : r.p) {
      out += ',';
      out += csv::exact(p);
    }
    out += ',';
    out += std::to_string(r.truth);
    out += '\n';
  }
  return out;
}

std::vector<ProbRow> read_probs_csv(const fs::path& path) {
  const auto lines = csv::read_lines(path.string());
  const std::vector<std::string> header{"id", "p0", "p1", "p2", "p3", "truth"};
  if (lines.empty() || csv::split_line(lines[0]) != header) {
    throw DataError(path.string() + ": header must be id,p0,p1,p2,p3,truth");
  }
  std::vector<ProbRow> rows;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    if (lines[n].empty()) continue;
    const auto f = csv::split_line(lines[n]);
    const std::string where = path.string() + ":" + std::to_string(n + 1);
    if (f.size() != 6) throw DataError(where + ": expected 6 fields");
    ProbRow r;
    r.id = f[0];
    for (std::size_t c = 0; c < 4; ++c) r.p[c] = parse_double(f[c + 1], where);
    r.truth = parse_label(f[5], where);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw DataError(path.string() + ": no rows");
  return rows;
}

void cmd_split(const SplitOptions& o) {
  RunConfig config = RunConfig::desk();
  if (o.manifest) {
    config.data.synthetic = false;
    config.data.manifest = o.manifest->string();
  }
  if (o.seed) config.seed = *o.seed;
  config.data.train_fraction = o.train_fraction;
  config.validate();
  const RunData d = load_run_data(config);
  write_text(o.out / "split.csv", split_csv(d.corpus, d.split));
}

TrainResult cmd_train(const TrainOptions& o) {
  RunConfig config = o.config ? load_config(*o.config) : RunConfig::desk();
  if (o.seed) config.seed = *o.seed;
  config.output_dir = o.out.string();
  config.validate();

  const RunData d = load_run_data(config);
  VaeClassifier model = init_model(config);
  TrainHooks hooks;
  if (o.verbose) {
    hooks.on_epoch = [](const EpochRecord& r) {
      std::cerr << "epoch " << r.epoch << " stage " << r.stage << " lr " << r.lr << " train_loss "
                << r.train.total << " val_loss " << r.val.total << " val_acc " << r.val_accuracy << '\n';
    };
  }
  TrainResult result = train(model, d.corpus, d.split, config, hooks);

  fs::create_directories(o.out);
  write_text(o.out / "curves.csv", curves_csv(result.curves));
  write_text(o.out / "losses.csv", loss_terms_csv(result.curves));
  save_checkpoint(o.out / "checkpoint.bin", result.best);
  write_text(o.out / "manifest.txt", to_key_values(config));
  return result;
}

EvalReport cmd_eval(const EvalOptions& o) {
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  RunConfig config = ck.config;
  if (o.manifest) {
    config.data.synthetic = false;
    config.data.manifest = o.manifest->string();
  }
  if (o.split) config.data.split = o.split->string();
  config.validate();

  const VaeClassifier model = model_from_checkpoint(ck);
  const RunData d = load_run_data(config);
  const SplitEvaluation ev = evaluate_split(model, d.corpus, d.split.val_ids, config);
  const EvalReport report = evaluate(ev.probs, ev.labels);
  fs::create_directories(o.out);
  write_text(o.out / "report.json", report_json(report));
  write_text(o.out / "probs.csv", probs_csv(prob_rows(d.corpus, ev)));
  return report;
}

EvalReport cmd_ensemble(const EnsembleOptions& o) {
  if (o.probs.empty()) throw ConfigError("ensemble needs at least one --probs file");
  std::vector<std::vector<ProbRow>> members;
  for (const auto& path : o.probs) members.push_back(read_probs_csv(path));
  const auto& ref = members.front();
  for (std::size_t m = 1; m < members.size(); ++m) {
    const auto& rows = members[m];
    const std::size_t n = std::min(rows.size(), ref.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (rows[i].id != ref[i].id) {
        throw DataError("misaligned sample ids: row " + std::to_string(i + 1) + " is '" + ref[i].id +
                        "' in " + o.probs[0].string() + " but '" + rows[i].id + "' in " +
                        o.probs[m].string());
      }
    }
    if (rows.size() != ref.size()) {
      throw DataError("misaligned sample ids: " + o.probs[m].string() + " has " +
                      std::to_string(rows.size()) + " rows, " + o.probs[0].string() + " has " +
                      std::to_string(ref.size()));
    }
  }

  std::vector<int> truths(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) truths[i] = ref[i].truth;
  if (o.truth) {
    const auto lines = csv::read_lines(o.truth->string());
    if (lines.empty()) throw DataError(o.truth->string() + ": empty file");
    const auto header = csv::split_line(lines[0]);
    const auto id_col = std::find(header.begin(), header.end(), "id") - header.begin();
    const auto truth_col = std::find(header.begin(), header.end(), "truth") - header.begin();
    if (id_col == static_cast<long>(header.size()) || truth_col == static_cast<long>(header.size())) {
      throw DataError(o.truth->string() + ": needs id and truth columns");
    }
    std::map<std::string, int> by_id;
    for (std::size_t n = 1; n < lines.size(); ++n) {
      if (lines[n].empty()) continue;
      const auto f = csv::split_line(lines[n]);
      const std::string where = o.truth->string() + ":" + std::to_string(n + 1);
      if (f.size() != header.size()) throw DataError(where + ": wrong field count");
      by_id[f[id_col]] = parse_label(f[truth_col], where);
    }
    for (std::size_t i = 0; i < ref.size(); ++i) {
      const auto it = by_id.find(ref[i].id);
      if (it == by_id.end()) throw DataError(o.truth->string() + ": no truth for sample '" + ref[i].id + "'");
      truths[i] = it->second;
    }
  }

  std::vector<Tensor> tensors;
  for (const auto& rows : members) tensors.push_back(rows_to_tensor(rows));
  const Tensor avg = ensemble_probs(tensors);
  const EvalReport report = evaluate(avg, truths);

  std::vector<ProbRow> out_rows(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    out_rows[i].id = ref[i].id;
    for (std::size_t c = 0; c < 4; ++c) out_rows[i].p[c] = avg.data()[i * 4 + c];
    out_rows[i].truth = truths[i];
  }
  fs::create_directories(o.out);
  write_text(o.out / "report.json", report_json(report));
  write_text(o.out / "probs.csv", probs_csv(out_rows));
  return report;
}

void cmd_synth(const SynthOptions& o) {
  DataConfig data;
  data.synthetic = true;
  data.synthetic_per_class = o.per_class;
  data.synthetic_resolution = o.resolution;
  if (o.per_class < 2) throw ConfigError("--per-class must be >= 2");
  if (o.resolution < 8) throw ConfigError("--resolution must be >= 8");
  write_corpus(load_data_corpus(data, o.seed), o.out);
}

std::optional<std::uint64_t> seed_from_env() {
  const char* s = std::getenv("MIXVAE_SEED");
  if (s == nullptr || *s == '\0') return std::nullopt;
  std::uint64_t v = 0;
  const std::string_view sv(s);
  const auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
  if (ec != std::errc() || ptr != sv.data() + sv.size()) {
    throw ConfigError("MIXVAE_SEED must be a non-negative integer, got '" + std::string(sv) + "'");
  }
  return v;
}

}  // namespace mixvae
