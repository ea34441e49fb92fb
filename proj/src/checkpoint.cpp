#include "mixvae/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mixvae/errors.hpp"

namespace mixvae {

namespace {

constexpr std::string_view kMagic = "MIXVAECK";

class Writer {
 public:
  void u32(std::uint32_t v) { put_le(v, 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u64(s.size());
    out_.append(s);
  }
  void raw(std::string_view s) { out_.append(s); }
  std::string take() { return std::move(out_); }

 private:
  void put_le(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t u64() { return get_le(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > in_.size() - pos_) throw DataError("checkpoint is truncated");
  }
  std::uint64_t get_le(int bytes) {
    need(static_cast<std::uint64_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

Checkpoint make_checkpoint(const VaeClassifier& model, const RunConfig& config, const Rng& rng,
                           std::uint64_t epoch, double best_val_accuracy) {
  Checkpoint ck;
  ck.config = config;
  for (const auto& p : model.parameters()) ck.parameters.emplace_back(p.name, p.value.detach());
  ck.rng_state = rng.state();
  ck.epoch = epoch;
  ck.best_val_accuracy = best_val_accuracy;
  return ck;
}

std::string encode_checkpoint(const Checkpoint& ck) {
  Writer w;
  w.raw(kMagic);
  w.u32(Checkpoint::kVersion);
  w.str(to_key_values(ck.config));
  w.str(ck.rng_state);
  w.u64(ck.epoch);
  w.f64(ck.best_val_accuracy);
  w.u64(ck.parameters.size());
  for (const auto& [name, t] : ck.parameters) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u64(d);
    for (double v : t.data()) w.f64(v);
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (bytes.size() < kMagic.size() || r.raw(kMagic.size()) != kMagic) {
    throw DataError("not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != Checkpoint::kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.config = config_from_key_values(parse_key_values(r.str()));
  ck.rng_state = r.str();
  ck.epoch = r.u64();
  ck.best_val_accuracy = r.f64();
  const std::uint64_t count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw DataError("checkpoint parameter '" + name + "' has implausible rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    std::vector<double> values(shape_numel(shape));
    for (double& v : values) v = r.f64();
    ck.parameters.emplace_back(std::move(name), Tensor::from(std::move(shape), std::move(values)));
  }
  if (!r.done()) throw DataError("checkpoint has trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  const std::string bytes = encode_checkpoint(ck);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return decode_checkpoint(os.str());
}

VaeClassifier model_from_checkpoint(const Checkpoint& ck) {
  Rng unused(0);
  VaeClassifier model(ck.config.model, unused);
  model.load_parameters(ck.parameters);
  return model;
}

}  // namespace mixvae
