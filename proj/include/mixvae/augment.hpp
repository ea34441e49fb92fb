#pragma once

#include <array>
#include <cstddef>

#include "mixvae/image.hpp"
#include "mixvae/ops.hpp"
#include "mixvae/rng.hpp"
#include "mixvae/tensor.hpp"

namespace mixvae {

/// Source-coordinate convention for bilinear resizing.
///
/// kHalfPixel (the pipeline default) maps output pixel centers onto input
/// pixel centers: src = (dst + 0.5) * in / out - 0.5, clamped to the image.
/// kAlignCorners pins the corner pixels: src = dst * (in - 1) / (out - 1).
enum class ResizeConvention { kHalfPixel, kAlignCorners };

struct AugmentConfig {
  std::size_t resize_h = 256;
  std::size_t resize_w = 256;
  double rotation_deg = 40.0;  // angle ~ U[-rotation_deg, +rotation_deg]
  double zoom_min = 0.8;
  double zoom_max = 1.2;
  double hflip_prob = 0.5;
  double vflip_prob = 0.5;
  std::size_t crop_h = 224;
  std::size_t crop_w = 224;
  std::array<double, 3> mean{0.485, 0.456, 0.406};
  std::array<double, 3> std{0.229, 0.224, 0.225};
  double fill = 0.0;  // value for pixels rotated or zoomed in from outside the image
  Mode mode = Mode::kTrain;

  /// Throws ConfigError on an inconsistent configuration.
  void validate() const;
};

Image resize_bilinear(const Image& img, std::size_t out_h, std::size_t out_w,
                      ResizeConvention convention = ResizeConvention::kHalfPixel);
/// Bilinear rotation about the image center; out-of-image samples take `fill`.
Image rotate(const Image& img, double degrees, double fill = 0.0);
/// Scales content about the center by `factor` (>1 zooms in), keeping the
/// canvas size; uncovered pixels take `fill`.
Image zoom(const Image& img, double factor, double fill = 0.0);
Image flip_horizontal(const Image& img);
Image flip_vertical(const Image& img);
Image crop(const Image& img, std::size_t top, std::size_t left, std::size_t h, std::size_t w);
Image center_crop(const Image& img, std::size_t h, std::size_t w);

Image random_rotate(const Image& img, const AugmentConfig& config, Rng& rng);
Image random_zoom(const Image& img, const AugmentConfig& config, Rng& rng);
Image random_flip_h(const Image& img, const AugmentConfig& config, Rng& rng);
Image random_flip_v(const Image& img, const AugmentConfig& config, Rng& rng);
Image random_crop(const Image& img, const AugmentConfig& config, Rng& rng);

Image normalize(const Image& img, const std::array<double, 3>& mean,
                const std::array<double, 3>& std);
Image denormalize(const Image& img, const std::array<double, 3>& mean,
                  const std::array<double, 3>& std);

/// [3,H,W] tensor with the image's values (no gradient).
Tensor to_tensor(const Image& img);

/// Full augmentation chain producing a [3, crop_h, crop_w] tensor.
///
/// Train mode: resize, random rotation, random zoom, horizontal flip,
/// vertical flip, random crop, normalize, drawing from `rng` in that order.
/// Test mode: resize, center crop, normalize; `rng` is not touched.
Tensor pipeline(const Image& img, const AugmentConfig& config, Rng& rng);

}  // namespace mixvae
