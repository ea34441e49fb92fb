#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace mixvae {

/// Planar 3-channel image, values nominally in [0, 1]. Layout is CHW.
struct Image {
  static constexpr std::size_t kChannels = 3;

  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  Image() = default;
  Image(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), values(kChannels * h * w, fill) {}

  bool empty() const { return height == 0 || width == 0; }
  std::size_t plane() const { return height * width; }

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return values[(c * height + y) * width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return values[(c * height + y) * width + x];
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Reads binary (P6) or ASCII (P3) PPM, or PNG. Values are scaled to [0, 1].
Image read_image(const std::filesystem::path& path);
/// Writes binary PPM with 8-bit channels (values clamped to [0, 1]).
void write_ppm(const std::filesystem::path& path, const Image& img);

}  // namespace mixvae
