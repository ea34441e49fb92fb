#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mixvae/augment.hpp"
#include "mixvae/image.hpp"
#include "mixvae/rng.hpp"
#include "mixvae/tensor.hpp"

namespace mixvae {

using ClassHistogram = std::array<std::size_t, 4>;

/// One row of a manifest: where the image and its segmented patch live.
struct SampleDescriptor {
  std::string id;
  std::filesystem::path image_path;
  std::filesystem::path patch_path;
  int label = 0;
};

struct Sample {
  std::string id;
  Image image;
  Image patch;  // reconstruction target; for debris the object crop itself
  int label = 0;
};

struct Corpus {
  std::vector<Sample> samples;

  ClassHistogram histogram() const;
  std::vector<int> labels() const;
};

/// Reads <root>/manifest.csv with header `image_path,patch_path,label` and an
/// optional leading `id` column (default id: the image path as written).
/// Paths are relative to `root`. All offending rows are reported together.
std::vector<SampleDescriptor> load_manifest(const std::filesystem::path& root);
ClassHistogram histogram(std::span<const SampleDescriptor> rows);
Corpus load_corpus(std::span<const SampleDescriptor> rows);

/// Writes a corpus to disk as PPM images plus manifest.csv, loadable by load_manifest.
void write_corpus(const Corpus& corpus, const std::filesystem::path& root);

struct SplitIndex {
  std::vector<std::size_t> train_ids;  // ascending
  std::vector<std::size_t> val_ids;    // ascending
};

/// Per class c with n_c samples, round(fraction * n_c) shuffled members go to
/// train (kept within [1, n_c - 1]) and the rest to validation.
SplitIndex stratified_split(std::span<const int> labels, double fraction, Rng& rng);

/// Four visually separable classes of geometric primitives with color and
/// texture noise. The patch is the primitive alone on a black background.
///   0 filled disc, 1 ring, 2 rotated square, 3 scattered debris blobs.
Corpus synthetic_dataset(std::size_t n_per_class, std::size_t resolution, Rng& rng);

struct Batch {
  Tensor x;             // [B,3,crop,crop], normalized
  Tensor patch_target;  // [B,3,R,R] in [0,1]
  Tensor y_onehot;      // [B,4]
  std::vector<std::size_t> sample_ids;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

/// Mini-batches over a subset of a corpus for one epoch.
///
/// Train mode visits the subset in an order drawn from (seed, epoch) and
/// augments each sample with an rng derived from (seed, epoch, sample id), so
/// any batch can be built independently of the others. Eval mode keeps the
/// given order and applies the test transforms. The last batch may be short.
class BatchLoader {
 public:
  BatchLoader(const Corpus& corpus, std::vector<std::size_t> ids, std::size_t batch_size,
              Mode mode, AugmentConfig augment, std::size_t recon_resolution, std::uint64_t seed,
              std::uint64_t epoch);

  std::size_t num_batches() const;
  std::size_t num_samples() const { return order_.size(); }
  Batch batch(std::size_t index) const;
  const std::vector<std::size_t>& order() const { return order_; }

 private:
  const Corpus* corpus_;
  std::vector<std::size_t> order_;
  std::size_t batch_size_;
  Mode mode_;
  AugmentConfig augment_;
  std::size_t recon_resolution_;
  std::uint64_t seed_;
  std::uint64_t epoch_;
};

}  // namespace mixvae
