#include "mixvae/config.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "mixvae/csv.hpp"
#include "mixvae/errors.hpp"

namespace mixvae {

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError("config key '" + key + "': invalid value '" + value + "' (expected " + expected + ")");
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    const auto x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return static_cast<std::size_t>(x);
  } catch (const std::exception&) {
    bad_value(key, v, "a non-negative integer");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    bad_value(key, v, "a real number");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  bad_value(key, v, "true or false");
}

std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  if (v.empty()) return out;
  for (const auto& item : csv::split_line(v)) out.push_back(parse_size(key, item));
  return out;
}

std::array<double, 3> parse_triple(const std::string& key, const std::string& v) {
  const auto items = csv::split_line(v);
  if (items.size() != 3) bad_value(key, v, "three comma-separated reals");
  return {parse_double(key, items[0]), parse_double(key, items[1]), parse_double(key, items[2])};
}

std::string show(bool b) { return b ? "true" : "false"; }
std::string show(double d) { return csv::exact(d); }
std::string show(std::size_t n) { return std::to_string(n); }
std::string show(const std::vector<std::size_t>& v) { return fmt::format("{}", fmt::join(v, ",")); }
std::string show(const std::array<double, 3>& a) {
  return show(a[0]) + "," + show(a[1]) + "," + show(a[2]);
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

// Binds a config member of one of the supported value types to its key.
template <class Get>
Field field(std::string key, Get member) {
  return Field{
      key,
      [key, member](RunConfig& c, const std::string& v) {
        auto& ref = member(c);
        using V = std::decay_t<decltype(ref)>;
        if constexpr (std::is_same_v<V, bool>) {
          ref = parse_bool(key, v);
        } else if constexpr (std::is_same_v<V, double>) {
          ref = parse_double(key, v);
        } else if constexpr (std::is_same_v<V, std::size_t>) {
          ref = parse_size(key, v);
        } else if constexpr (std::is_same_v<V, std::vector<std::size_t>>) {
          ref = parse_sizes(key, v);
        } else if constexpr (std::is_same_v<V, std::array<double, 3>>) {
          ref = parse_triple(key, v);
        } else {
          static_assert(std::is_same_v<V, std::string>);
          ref = v;
        }
      },
      [member](const RunConfig& c) {
        auto& ref = member(const_cast<RunConfig&>(c));
        if constexpr (std::is_same_v<std::decay_t<decltype(ref)>, std::string>) {
          return ref;
        } else {
          return show(ref);
        }
      }};
}

#define MIXVAE_FIELD(key, expr) field(key, [](RunConfig& c) -> auto& { return c.expr; })

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(Field{"seed",
                      [](RunConfig& c, const std::string& v) {
                        try {
                          std::size_t pos = 0;
                          c.seed = std::stoull(v, &pos);
                          if (pos != v.size() || v.empty() || v[0] == '-') throw std::invalid_argument("");
                        } catch (const std::exception&) {
                          bad_value("seed", v, "an unsigned 64-bit integer");
                        }
                      },
                      [](const RunConfig& c) { return std::to_string(c.seed); }});
    f.push_back(MIXVAE_FIELD("output.dir", output_dir));
    f.push_back(MIXVAE_FIELD("data.synthetic", data.synthetic));
    f.push_back(MIXVAE_FIELD("data.synthetic_per_class", data.synthetic_per_class));
    f.push_back(MIXVAE_FIELD("data.synthetic_resolution", data.synthetic_resolution));
    f.push_back(MIXVAE_FIELD("data.manifest", data.manifest));
    f.push_back(MIXVAE_FIELD("data.split", data.split));
    f.push_back(MIXVAE_FIELD("data.train_fraction", data.train_fraction));
    f.push_back(MIXVAE_FIELD("augment.resize_h", augment.resize_h));
    f.push_back(MIXVAE_FIELD("augment.resize_w", augment.resize_w));
    f.push_back(MIXVAE_FIELD("augment.rotation_deg", augment.rotation_deg));
    f.push_back(MIXVAE_FIELD("augment.zoom_min", augment.zoom_min));
    f.push_back(MIXVAE_FIELD("augment.zoom_max", augment.zoom_max));
    f.push_back(MIXVAE_FIELD("augment.hflip_prob", augment.hflip_prob));
    f.push_back(MIXVAE_FIELD("augment.vflip_prob", augment.vflip_prob));
    f.push_back(MIXVAE_FIELD("augment.crop_h", augment.crop_h));
    f.push_back(MIXVAE_FIELD("augment.crop_w", augment.crop_w));
    f.push_back(MIXVAE_FIELD("augment.mean", augment.mean));
    f.push_back(MIXVAE_FIELD("augment.std", augment.std));
    f.push_back(MIXVAE_FIELD("augment.fill", augment.fill));
    f.push_back(MIXVAE_FIELD("model.input_resolution", model.input_resolution));
    f.push_back(MIXVAE_FIELD("model.channels", model.channels));
    f.push_back(MIXVAE_FIELD("model.downsample_blocks", model.downsample_blocks));
    f.push_back(MIXVAE_FIELD("model.latent_dim", model.latent_dim));
    f.push_back(MIXVAE_FIELD("model.num_classes", model.num_classes));
    f.push_back(MIXVAE_FIELD("model.classifier_hidden", model.classifier_hidden));
    f.push_back(MIXVAE_FIELD("model.dropout_p", model.dropout_p));
    f.push_back(MIXVAE_FIELD("model.decoder_layers", model.decoder_layers));
    f.push_back(MIXVAE_FIELD("model.decoder_channels", model.decoder_channels));
    f.push_back(MIXVAE_FIELD("model.recon_resolution", model.recon_resolution));
    f.push_back(MIXVAE_FIELD("model.vae", model.vae));
    f.push_back(MIXVAE_FIELD("mixup.enabled", mixup.enabled));
    f.push_back(MIXVAE_FIELD("mixup.alpha", mixup.alpha));
    f.push_back(MIXVAE_FIELD("mixup.eligible_blocks", mixup.eligible_blocks));
    f.push_back(MIXVAE_FIELD("objective.recon_weight", objective.recon_weight));
    f.push_back(MIXVAE_FIELD("objective.kl_weight", objective.kl_weight));
    f.push_back(MIXVAE_FIELD("objective.supervised_weight", objective.supervised_weight));
    f.push_back(MIXVAE_FIELD("objective.log_eps", objective.log_eps));
    f.push_back(Field{"objective.supervised_mode",
                      [](RunConfig& c, const std::string& v) {
                        if (v == "categorical") c.objective.supervised_mode = SupervisedMode::kCategorical;
                        else if (v == "binary") c.objective.supervised_mode = SupervisedMode::kBinary;
                        else bad_value("objective.supervised_mode", v, "categorical or binary");
                      },
                      [](const RunConfig& c) {
                        return std::string(c.objective.supervised_mode == SupervisedMode::kBinary
                                               ? "binary"
                                               : "categorical");
                      }});
    f.push_back(MIXVAE_FIELD("optim.lr", optim.lr));
    f.push_back(MIXVAE_FIELD("optim.momentum", optim.momentum));
    f.push_back(MIXVAE_FIELD("optim.nesterov", optim.nesterov));
    f.push_back(MIXVAE_FIELD("optim.weight_decay", optim.weight_decay));
    f.push_back(MIXVAE_FIELD("optim.decay_biases", optim.decay_biases));
    f.push_back(MIXVAE_FIELD("optim.grad_clip_norm", optim.grad_clip_norm));
    f.push_back(MIXVAE_FIELD("optim.batch_size", optim.batch_size));
    f.push_back(MIXVAE_FIELD("optim.plateau_factor", optim.plateau_factor));
    f.push_back(MIXVAE_FIELD("optim.plateau_patience", optim.plateau_patience));
    f.push_back(Field{"optim.plateau_monitor",
                      [](RunConfig& c, const std::string& v) {
                        if (v == "val_loss") c.optim.plateau_monitor = PlateauMonitor::kValidationLoss;
                        else if (v == "train_loss") c.optim.plateau_monitor = PlateauMonitor::kTrainLoss;
                        else bad_value("optim.plateau_monitor", v, "val_loss or train_loss");
                      },
                      [](const RunConfig& c) {
                        return std::string(c.optim.plateau_monitor == PlateauMonitor::kTrainLoss
                                               ? "train_loss"
                                               : "val_loss");
                      }});
    f.push_back(MIXVAE_FIELD("optim.stage1_epochs", optim.stage1_epochs));
    f.push_back(MIXVAE_FIELD("optim.stage2_epochs", optim.stage2_epochs));
    return f;
  }();
  return table;
}

#undef MIXVAE_FIELD

}  // namespace

RunConfig RunConfig::desk() {
  RunConfig c;
  c.seed = 7;
  c.data.synthetic = true;
  c.data.synthetic_per_class = 200;
  c.data.synthetic_resolution = 32;
  c.augment.resize_h = c.augment.resize_w = 36;
  c.augment.crop_h = c.augment.crop_w = 32;
  c.model = ModelConfig::desk();
  c.mixup.enabled = true;
  c.mixup.alpha = 1.0;
  c.optim.batch_size = 32;
  // The desk encoder has no normalization layers; without clipping, the first
  // stage-2 steps can push logvar past exp() overflow.
  c.optim.grad_clip_norm = 5.0;
  c.optim.stage1_epochs = 5;
  c.optim.stage2_epochs = 15;
  return c;
}

RunConfig RunConfig::paper_recipe() {
  RunConfig c;
  c.data.synthetic = false;
  c.model = ModelConfig::b3_like();
  c.model.input_resolution = 224;
  return c;
}

void RunConfig::validate() const {
  augment.validate();
  model.validate();
  if (augment.crop_h != model.input_resolution || augment.crop_w != model.input_resolution) {
    throw ConfigError("augment.crop_h/crop_w must equal model.input_resolution (" +
                      std::to_string(model.input_resolution) + ")");
  }
  mixup.validate(model.num_blocks());
  objective.validate();
  optim.validate();
  if (!(data.train_fraction > 0.0 && data.train_fraction < 1.0)) {
    throw ConfigError("data.train_fraction must be in (0, 1)");
  }
  if (data.synthetic) {
    if (data.synthetic_per_class < 2) throw ConfigError("data.synthetic_per_class must be >= 2");
    if (data.synthetic_resolution < 8) throw ConfigError("data.synthetic_resolution must be >= 8");
  } else if (data.manifest.empty()) {
    throw ConfigError("data.manifest is required when data.synthetic=false");
  }
}

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(ln) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string{};
      return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(ln) + ": empty key");
    if (!kv.emplace(key, value).second) throw ConfigError("config key '" + key + "' given twice");
  }
  return kv;
}

RunConfig config_from_key_values(const KeyValues& kv) {
  RunConfig c = RunConfig::desk();
  if (auto it = kv.find("base"); it != kv.end()) {
    if (it->second == "paper") c = RunConfig::paper_recipe();
    else if (it->second != "desk") bad_value("base", it->second, "desk or paper");
  }
  if (auto it = kv.find("model.preset"); it != kv.end()) {
    const std::size_t res = c.model.input_resolution;
    if (it->second == "desk") c.model = ModelConfig::desk();
    else if (it->second == "b3") c.model = ModelConfig::b3_like();
    else if (it->second == "b4") c.model = ModelConfig::b4_like();
    else bad_value("model.preset", it->second, "desk, b3 or b4");
    if (it->second != "desk") c.model.input_resolution = res;
  }
  for (const auto& [key, value] : kv) {
    if (key == "base" || key == "model.preset") continue;
    const auto& table = fields();
    auto f = std::find_if(table.begin(), table.end(), [&](const Field& fd) { return fd.key == key; });
    if (f == table.end()) throw ConfigError("unknown config key '" + key + "'");
    f->set(c, value);
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return config_from_key_values(parse_key_values(os.str()));
}

std::string to_key_values(const RunConfig& config) {
  std::map<std::string, std::string> sorted;
  for (const auto& f : fields()) sorted.emplace(f.key, f.get(config));
  std::string out;
  for (const auto& [k, v] : sorted) out += k + "=" + v + "\n";
  return out;
}

}  // namespace mixvae
