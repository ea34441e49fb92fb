#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include "mixvae/errors.hpp"
#include "mixvae/image.hpp"

namespace mixvae {

namespace {

std::string read_token(std::istream& in) {
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
      if (!tok.empty()) break;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path.string());
  const std::string magic = read_token(in);
  if (magic != "P6" && magic != "P3") throw DataError("not a PPM (P3/P6) file: " + path.string());
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(read_token(in));
    h = std::stoul(read_token(in));
    maxval = std::stoul(read_token(in));
  } catch (const std::exception&) {
    throw DataError("malformed PPM header: " + path.string());
  }
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) {
    throw DataError("unsupported PPM geometry in " + path.string());
  }
  Image img(h, w);
  const double scale = static_cast<double>(maxval);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        std::size_t v = 0;
        if (magic == "P3") {
          const std::string tok = read_token(in);
          if (tok.empty()) throw DataError("truncated PPM: " + path.string());
          v = std::stoul(tok);
        } else if (maxval < 256) {
          const int b = in.get();
          if (b == EOF) throw DataError("truncated PPM: " + path.string());
          v = static_cast<std::size_t>(b);
        } else {
          const int hi = in.get(), lo = in.get();
          if (lo == EOF) throw DataError("truncated PPM: " + path.string());
          v = static_cast<std::size_t>(hi) << 8 | static_cast<std::size_t>(lo);
        }
        img.at(c, y, x) = std::min(1.0, static_cast<double>(v) / scale);
      }
    }
  }
  return img;
}

Image read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw DataError("cannot read PNG " + path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&png);
    throw DataError("cannot decode PNG " + path.string() + ": " + png.message);
  }
  Image img(png.height, png.width);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        img.at(c, y, x) = buf[(y * img.width + x) * 3 + c] / 255.0;
      }
    }
  }
  return img;
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("image file not found: " + path.string());
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return read_png(path);
  return read_ppm(path);
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
      }
    }
  }
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace mixvae
