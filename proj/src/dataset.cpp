#include "mixvae/dataset.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "mixvae/csv.hpp"
#include "mixvae/errors.hpp"

namespace mixvae {

namespace fs = std::filesystem;

ClassHistogram Corpus::histogram() const {
  ClassHistogram h{};
  for (const auto& s : samples) ++h[static_cast<std::size_t>(s.label)];
  return h;
}

std::vector<int> Corpus::labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

std::vector<SampleDescriptor> load_manifest(const fs::path& root) {
  const fs::path manifest = root / "manifest.csv";
  const auto lines = csv::read_lines(manifest.string());
  if (lines.empty()) throw DataError("empty manifest: " + manifest.string());
  const auto header = csv::split_line(lines[0]);
  const bool has_id = !header.empty() && header[0] == "id";
  const std::vector<std::string> expected =
      has_id ? std::vector<std::string>{"id", "image_path", "patch_path", "label"}
             : std::vector<std::string>{"image_path", "patch_path", "label"};
  if (header != expected) {
    throw DataError(manifest.string() + ": header must be " + fmt::format("{}", fmt::join(expected, ",")));
  }

  std::vector<SampleDescriptor> rows;
  std::vector<std::string> problems;
  std::set<std::string> seen;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto f = csv::split_line(lines[ln]);
    const std::string where = fmt::format("row {}", ln + 1);
    if (f.size() != expected.size()) {
      problems.push_back(where + ": expected " + std::to_string(expected.size()) + " fields");
      continue;
    }
    std::size_t k = 0;
    SampleDescriptor d;
    d.id = has_id ? f[k++] : f[0];
    d.image_path = root / f[k++];
    d.patch_path = root / f[k++];
    const std::string& label = f[k];
    if (label.size() != 1 || label[0] < '0' || label[0] > '3') {
      problems.push_back(where + ": unknown label '" + label + "'");
      continue;
    }
    d.label = label[0] - '0';
    if (!seen.insert(d.id).second) problems.push_back(where + ": duplicate id '" + d.id + "'");
    if (!fs::exists(d.image_path)) problems.push_back(where + ": missing file " + d.image_path.string());
    if (!fs::exists(d.patch_path)) problems.push_back(where + ": missing file " + d.patch_path.string());
    rows.push_back(std::move(d));
  }
  if (!problems.empty()) {
    std::ostringstream os;
    os << manifest.string() << ": " << problems.size() << " invalid row(s)";
    for (const auto& p : problems) os << "\n  " << p;
    throw DataError(os.str());
  }
  return rows;
}

ClassHistogram histogram(std::span<const SampleDescriptor> rows) {
  ClassHistogram h{};
  for (const auto& r : rows) ++h[static_cast<std::size_t>(r.label)];
  return h;
}

Corpus load_corpus(std::span<const SampleDescriptor> rows) {
  Corpus c;
  c.samples.reserve(rows.size());
  for (const auto& r : rows) c.samples.push_back({r.id, read_image(r.image_path), read_image(r.patch_path), r.label});
  return c;
}

void write_corpus(const Corpus& corpus, const fs::path& root) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "patches");
  std::ofstream out(root / "manifest.csv");
  if (!out) throw DataError("cannot write manifest under " + root.string());
  out << "id,image_path,patch_path,label\n";
  for (const auto& s : corpus.samples) {
    const std::string image = "images/" + s.id + ".ppm";
    const std::string patch = "patches/" + s.id + ".ppm";
    write_ppm(root / image, s.image);
    write_ppm(root / patch, s.patch);
    out << s.id << ',' << image << ',' << patch << ',' << s.label << '\n';
  }
}

SplitIndex stratified_split(std::span<const int> labels, double fraction, Rng& rng) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("split fraction must be in (0, 1)");
  std::array<std::vector<std::size_t>, 4> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] > 3) throw DataError("label out of range at index " + std::to_string(i));
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  SplitIndex split;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.empty()) continue;
    if (members.size() < 2) {
      throw DataError("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                      " sample; stratified split needs at least 2 per class");
    }
    rng.shuffle(members.begin(), members.end());
    const auto n = static_cast<double>(members.size());
    auto n_train = static_cast<std::size_t>(std::lround(fraction * n));
    n_train = std::clamp<std::size_t>(n_train, 1, members.size() - 1);
    split.train_ids.insert(split.train_ids.end(), members.begin(), members.begin() + static_cast<long>(n_train));
    split.val_ids.insert(split.val_ids.end(), members.begin() + static_cast<long>(n_train), members.end());
  }
  std::sort(split.train_ids.begin(), split.train_ids.end());
  std::sort(split.val_ids.begin(), split.val_ids.end());
  return split;
}

Corpus synthetic_dataset(std::size_t n_per_class, std::size_t resolution, Rng& rng) {
  if (n_per_class < 2) throw ConfigError("synthetic_dataset: need at least 2 samples per class");
  if (resolution < 8) throw ConfigError("synthetic_dataset: resolution must be >= 8");
  static constexpr std::array<std::array<double, 3>, 4> kPalette{{
      {0.95, 0.90, 0.15},  // disc
      {0.95, 0.15, 0.85},  // ring
      {0.15, 0.90, 0.90},  // square
      {0.20, 0.30, 1.00},  // debris
  }};
  const double r = static_cast<double>(resolution);
  Corpus corpus;
  corpus.samples.reserve(4 * n_per_class);
  for (std::size_t i = 0; i < n_per_class; ++i) {
    for (int label = 0; label < 4; ++label) {
      Sample s;
      s.id = fmt::format("syn_{:05d}", corpus.samples.size());
      s.label = label;
      s.image = Image(resolution, resolution);
      s.patch = Image(resolution, resolution);

      const double bg = rng.uniform(0.05, 0.3);
      std::array<double, 3> bg_tint{}, color{};
      for (std::size_t c = 0; c < 3; ++c) {
        bg_tint[c] = bg + rng.uniform(-0.03, 0.03);
        color[c] = std::clamp(kPalette[label][c] + rng.uniform(-0.08, 0.08), 0.0, 1.0);
      }
      const double cx = r / 2.0 + rng.uniform(-r / 10.0, r / 10.0);
      const double cy = r / 2.0 + rng.uniform(-r / 10.0, r / 10.0);
      const double radius = r * rng.uniform(0.30, 0.40);
      const double theta = rng.uniform(0.0, std::numbers::pi / 2.0);
      struct Blob {
        double x, y, rad;
      };
      std::vector<Blob> blobs;
      if (label == 3) {
        const std::size_t k = 5 + rng.uniform_index(4);
        for (std::size_t b = 0; b < k; ++b) {
          blobs.push_back({rng.uniform(0.15 * r, 0.85 * r), rng.uniform(0.15 * r, 0.85 * r),
                           rng.uniform(0.08 * r, 0.14 * r)});
        }
      }
      auto inside = [&](double x, double y) {
        const double dx = x - cx, dy = y - cy;
        const double d = std::hypot(dx, dy);
        switch (label) {
          case 0:
            return d <= radius;
          case 1:
            return d <= radius && d >= 0.5 * radius;
          case 2: {
            const double u = std::cos(theta) * dx + std::sin(theta) * dy;
            const double v = -std::sin(theta) * dx + std::cos(theta) * dy;
            return std::abs(u) <= 0.85 * radius && std::abs(v) <= 0.85 * radius;
          }
          default:
            return std::any_of(blobs.begin(), blobs.end(), [&](const Blob& b) {
              return std::hypot(x - b.x, y - b.y) <= b.rad;
            });
        }
      };
      for (std::size_t y = 0; y < resolution; ++y) {
        for (std::size_t x = 0; x < resolution; ++x) {
          const bool obj = inside(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5);
          for (std::size_t c = 0; c < 3; ++c) {
            if (obj) {
              const double v = std::clamp(color[c] + rng.uniform(-0.05, 0.05), 0.0, 1.0);
              s.image.at(c, y, x) = v;
              s.patch.at(c, y, x) = v;
            } else {
              s.image.at(c, y, x) = std::clamp(bg_tint[c] + rng.uniform(-0.06, 0.06), 0.0, 1.0);
            }
          }
        }
      }
      corpus.samples.push_back(std::move(s));
    }
  }
  return corpus;
}

BatchLoader::BatchLoader(const Corpus& corpus, std::vector<std::size_t> ids, std::size_t batch_size,
                         Mode mode, AugmentConfig augment, std::size_t recon_resolution,
                         std::uint64_t seed, std::uint64_t epoch)
    : corpus_(&corpus),
      order_(std::move(ids)),
      batch_size_(batch_size),
      mode_(mode),
      augment_(std::move(augment)),
      recon_resolution_(recon_resolution),
      seed_(seed),
      epoch_(epoch) {
  if (batch_size_ == 0) throw ConfigError("batch size must be >= 1");
  for (std::size_t id : order_) {
    if (id >= corpus.samples.size()) throw DataError("sample id " + std::to_string(id) + " out of range");
  }
  augment_.mode = mode_;
  augment_.validate();
  if (mode_ == Mode::kTrain) {
    Rng order_rng = Rng::derive(seed_, {epoch_, 0x6f72646572ULL});
    order_rng.shuffle(order_.begin(), order_.end());
  }
}

std::size_t BatchLoader::num_batches() const { return (order_.size() + batch_size_ - 1) / batch_size_; }

Batch BatchLoader::batch(std::size_t index) const {
  if (index >= num_batches()) throw UsageError("batch index out of range");
  const std::size_t begin = index * batch_size_;
  const std::size_t end = std::min(order_.size(), begin + batch_size_);
  const std::size_t n = end - begin;
  const std::size_t ch = augment_.crop_h, cw = augment_.crop_w, R = recon_resolution_;

  std::vector<double> x(n * 3 * ch * cw), patch(n * 3 * R * R), y(n * 4, 0.0);
  Batch b;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t id = order_[begin + i];
    const Sample& s = corpus_->samples[id];
    Rng sample_rng = Rng::derive(seed_, {epoch_, id});
    const Tensor img = pipeline(s.image, augment_, sample_rng);
    std::copy(img.data().begin(), img.data().end(), x.begin() + static_cast<long>(i * 3 * ch * cw));
    const Image target = resize_bilinear(s.patch, R, R);
    std::copy(target.values.begin(), target.values.end(), patch.begin() + static_cast<long>(i * 3 * R * R));
    y[i * 4 + static_cast<std::size_t>(s.label)] = 1.0;
    b.sample_ids.push_back(id);
    b.labels.push_back(s.label);
  }
  b.x = Tensor::from({n, 3, ch, cw}, std::move(x));
  b.patch_target = Tensor::from({n, 3, R, R}, std::move(patch));
  b.y_onehot = Tensor::from({n, 4}, std::move(y));
  return b;
}

}  // namespace mixvae
