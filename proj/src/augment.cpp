#include "mixvae/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mixvae/errors.hpp"

namespace mixvae {

namespace {

void require_nonempty(const Image& img, const char* op) {
  if (img.empty()) throw ShapeError(std::string(op) + ": empty input image");
  if (img.values.size() != Image::kChannels * img.plane()) {
    throw ShapeError(std::string(op) + ": image buffer does not match its extents");
  }
}

// a + f * (b - a) stays inside [min(a,b), max(a,b)] under rounding.
inline double blend(double a, double b, double f) { return a + f * (b - a); }

/// Bilinear sample at continuous pixel coordinates; neighbors outside the
/// image contribute `fill`.
double sample(const Image& img, std::size_t c, double sy, double sx, double fill) {
  const double fy0 = std::floor(sy), fx0 = std::floor(sx);
  const long y0 = static_cast<long>(fy0), x0 = static_cast<long>(fx0);
  const double fy = sy - fy0, fx = sx - fx0;
  const long h = static_cast<long>(img.height), w = static_cast<long>(img.width);
  auto px = [&](long y, long x) {
    if (y < 0 || y >= h || x < 0 || x >= w) return fill;
    return img.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
  };
  const double top = blend(px(y0, x0), px(y0, x0 + 1), fx);
  const double bottom = blend(px(y0 + 1, x0), px(y0 + 1, x0 + 1), fx);
  return blend(top, bottom, fy);
}

/// Inverse-maps every output pixel through `to_source` and samples bilinearly.
template <class Map>
Image warp(const Image& img, Map to_source, double fill) {
  Image out(img.height, img.width);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const auto [sy, sx] = to_source(static_cast<double>(y), static_cast<double>(x));
      for (std::size_t c = 0; c < Image::kChannels; ++c) out.at(c, y, x) = sample(img, c, sy, sx, fill);
    }
  }
  return out;
}

struct AxisTap {
  std::size_t lo, hi;
  double frac;
};

std::vector<AxisTap> axis_taps(std::size_t in, std::size_t out, ResizeConvention convention) {
  std::vector<AxisTap> taps(out);
  const double last = static_cast<double>(in - 1);
  for (std::size_t i = 0; i < out; ++i) {
    double src;
    if (convention == ResizeConvention::kHalfPixel) {
      src = (static_cast<double>(i) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
    } else {
      src = out == 1 ? 0.0 : static_cast<double>(i) * last / static_cast<double>(out - 1);
    }
    src = std::clamp(src, 0.0, last);
    const auto lo = static_cast<std::size_t>(std::floor(src));
    taps[i] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace

void AugmentConfig::validate() const {
  if (resize_h == 0 || resize_w == 0) throw ConfigError("augment: resize extents must be >= 1");
  if (crop_h == 0 || crop_w == 0) throw ConfigError("augment: crop extents must be >= 1");
  if (crop_h > resize_h || crop_w > resize_w) {
    throw ConfigError("augment: crop (" + std::to_string(crop_h) + "x" + std::to_string(crop_w) +
                      ") exceeds resize (" + std::to_string(resize_h) + "x" +
                      std::to_string(resize_w) + ")");
  }
  if (!(zoom_min > 0.0) || !(zoom_max >= zoom_min)) {
    throw ConfigError("augment: zoom range must be positive and ordered");
  }
  if (!(rotation_deg >= 0.0)) throw ConfigError("augment: rotation range must be >= 0");
  if (!(hflip_prob >= 0.0 && hflip_prob <= 1.0) || !(vflip_prob >= 0.0 && vflip_prob <= 1.0)) {
    throw ConfigError("augment: flip probabilities must be in [0, 1]");
  }
  for (double s : std) {
    if (!(s > 0.0)) throw ConfigError("augment: normalization std must be > 0");
  }
  if (!std::isfinite(fill)) throw ConfigError("augment: fill must be finite");
}

Image resize_bilinear(const Image& img, std::size_t out_h, std::size_t out_w,
                      ResizeConvention convention) {
  require_nonempty(img, "resize_bilinear");
  if (out_h == 0 || out_w == 0) throw ShapeError("resize_bilinear: output extents must be >= 1");
  const auto ty = axis_taps(img.height, out_h, convention);
  const auto tx = axis_taps(img.width, out_w, convention);
  Image out(out_h, out_w);
  for (std::size_t c = 0; c < Image::kChannels; ++c) {
    for (std::size_t y = 0; y < out_h; ++y) {
      for (std::size_t x = 0; x < out_w; ++x) {
        const double top = blend(img.at(c, ty[y].lo, tx[x].lo), img.at(c, ty[y].lo, tx[x].hi), tx[x].frac);
        const double bottom =
            blend(img.at(c, ty[y].hi, tx[x].lo), img.at(c, ty[y].hi, tx[x].hi), tx[x].frac);
        out.at(c, y, x) = blend(top, bottom, ty[y].frac);
      }
    }
  }
  return out;
}

Image rotate(const Image& img, double degrees, double fill) {
  require_nonempty(img, "rotate");
  const double rad = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  const double cy = (static_cast<double>(img.height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(img.width) - 1.0) / 2.0;
  return warp(
      img,
      [=](double y, double x) {
        const double dy = y - cy, dx = x - cx;
        return std::pair{cy - sn * dx + cs * dy, cx + cs * dx + sn * dy};
      },
      fill);
}

Image zoom(const Image& img, double factor, double fill) {
  require_nonempty(img, "zoom");
  if (!(factor > 0.0)) throw ConfigError("zoom: factor must be positive");
  const double cy = (static_cast<double>(img.height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(img.width) - 1.0) / 2.0;
  return warp(
      img,
      [=](double y, double x) { return std::pair{cy + (y - cy) / factor, cx + (x - cx) / factor}; },
      fill);
}

Image flip_horizontal(const Image& img) {
  Image out(img.height, img.width);
  for (std::size_t c = 0; c < Image::kChannels; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
  return out;
}

Image flip_vertical(const Image& img) {
  Image out(img.height, img.width);
  for (std::size_t c = 0; c < Image::kChannels; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) out.at(c, y, x) = img.at(c, img.height - 1 - y, x);
  return out;
}

Image crop(const Image& img, std::size_t top, std::size_t left, std::size_t h, std::size_t w) {
  if (top + h > img.height || left + w > img.width) {
    throw ShapeError("crop: window " + std::to_string(h) + "x" + std::to_string(w) + " at (" +
                     std::to_string(top) + "," + std::to_string(left) + ") exceeds image " +
                     std::to_string(img.height) + "x" + std::to_string(img.width));
  }
  Image out(h, w);
  for (std::size_t c = 0; c < Image::kChannels; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, top + y, left + x);
  return out;
}

Image center_crop(const Image& img, std::size_t h, std::size_t w) {
  if (h > img.height || w > img.width) {
    throw ShapeError("center_crop: image " + std::to_string(img.height) + "x" +
                     std::to_string(img.width) + " smaller than crop " + std::to_string(h) + "x" +
                     std::to_string(w));
  }
  return crop(img, (img.height - h) / 2, (img.width - w) / 2, h, w);
}

Image random_rotate(const Image& img, const AugmentConfig& config, Rng& rng) {
  return rotate(img, rng.uniform(-config.rotation_deg, config.rotation_deg), config.fill);
}

Image random_zoom(const Image& img, const AugmentConfig& config, Rng& rng) {
  return zoom(img, rng.uniform(config.zoom_min, config.zoom_max), config.fill);
}

Image random_flip_h(const Image& img, const AugmentConfig& config, Rng& rng) {
  return rng.bernoulli(config.hflip_prob) ? flip_horizontal(img) : img;
}

Image random_flip_v(const Image& img, const AugmentConfig& config, Rng& rng) {
  return rng.bernoulli(config.vflip_prob) ? flip_vertical(img) : img;
}

Image random_crop(const Image& img, const AugmentConfig& config, Rng& rng) {
  if (config.crop_h > img.height || config.crop_w > img.width) {
    throw ShapeError("random_crop: image " + std::to_string(img.height) + "x" +
                     std::to_string(img.width) + " smaller than crop " +
                     std::to_string(config.crop_h) + "x" + std::to_string(config.crop_w));
  }
  const std::size_t top = rng.uniform_index(img.height - config.crop_h + 1);
  const std::size_t left = rng.uniform_index(img.width - config.crop_w + 1);
  return crop(img, top, left, config.crop_h, config.crop_w);
}

Image normalize(const Image& img, const std::array<double, 3>& mean,
                const std::array<double, 3>& std) {
  for (double s : std) {
    if (!(s > 0.0)) throw ConfigError("normalize: std entries must be > 0");
  }
  Image out = img;
  const std::size_t plane = img.plane();
  for (std::size_t c = 0; c < Image::kChannels; ++c)
    for (std::size_t i = 0; i < plane; ++i) {
      double& v = out.values[c * plane + i];
      v = (v - mean[c]) / std[c];
    }
  return out;
}

Image denormalize(const Image& img, const std::array<double, 3>& mean,
                  const std::array<double, 3>& std) {
  Image out = img;
  const std::size_t plane = img.plane();
  for (std::size_t c = 0; c < Image::kChannels; ++c)
    for (std::size_t i = 0; i < plane; ++i) {
      double& v = out.values[c * plane + i];
      v = v * std[c] + mean[c];
    }
  return out;
}

Tensor to_tensor(const Image& img) {
  return Tensor::from({Image::kChannels, img.height, img.width}, img.values);
}

Tensor pipeline(const Image& img, const AugmentConfig& config, Rng& rng) {
  config.validate();
  Image x = resize_bilinear(img, config.resize_h, config.resize_w);
  if (config.mode == Mode::kTrain) {
    x = random_rotate(x, config, rng);
    x = random_zoom(x, config, rng);
    x = random_flip_h(x, config, rng);
    x = random_flip_v(x, config, rng);
    x = random_crop(x, config, rng);
  } else {
    x = center_crop(x, config.crop_h, config.crop_w);
  }
  return to_tensor(normalize(x, config.mean, config.std));
}

}  // namespace mixvae
