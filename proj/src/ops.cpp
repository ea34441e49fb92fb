#include "mixvae/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "mixvae/errors.hpp"

namespace mixvae {

namespace {

using detail::Node;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

bool wants(const Node& self, std::size_t i) { return self.inputs[i]->requires_grad; }

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                     ", got " + shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

struct ConvGeometry {
  std::size_t batch, channels, height, width;
  std::size_t kernels, kh, kw;
  std::size_t stride, padding;
  std::size_t out_h, out_w;

  std::size_t patch() const { return channels * kh * kw; }
  std::size_t out_plane() const { return out_h * out_w; }
};

void im2col(const ConvGeometry& g, const double* image, double* col) {
  const std::size_t plane = g.out_plane();
  for (std::size_t c = 0; c < g.channels; ++c) {
    const double* chan = image + c * g.height * g.width;
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        double* row = col + ((c * g.kh + ki) * g.kw + kj) * plane;
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const long ih = static_cast<long>(oh * g.stride + ki) - static_cast<long>(g.padding);
          double* dst = row + oh * g.out_w;
          if (ih < 0 || ih >= static_cast<long>(g.height)) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src = chan + static_cast<std::size_t>(ih) * g.width;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const long iw = static_cast<long>(ow * g.stride + kj) - static_cast<long>(g.padding);
            dst[ow] = (iw < 0 || iw >= static_cast<long>(g.width)) ? 0.0
                                                                    : src[static_cast<std::size_t>(iw)];
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const double* col, double* image) {
  const std::size_t plane = g.out_plane();
  for (std::size_t c = 0; c < g.channels; ++c) {
    double* chan = image + c * g.height * g.width;
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const double* row = col + ((c * g.kh + ki) * g.kw + kj) * plane;
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const long ih = static_cast<long>(oh * g.stride + ki) - static_cast<long>(g.padding);
          if (ih < 0 || ih >= static_cast<long>(g.height)) continue;
          double* dst = chan + static_cast<std::size_t>(ih) * g.width;
          const double* src = row + oh * g.out_w;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const long iw = static_cast<long>(ow * g.stride + kj) - static_cast<long>(g.padding);
            if (iw >= 0 && iw < static_cast<long>(g.width)) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

template <class F, class D>
Tensor unary(const Tensor& x, F f, D dfdx) {
  std::vector<double> out(x.numel());
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return detail::make_result(x.shape(), std::move(out), {x}, [dfdx](Node& self) {
    const auto& xv = self.inputs[0]->value;
    auto& gx = self.inputs[0]->grad;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * dfdx(xv[i], self.value[i]);
  });
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  require_rank(input, 4, "conv2d", "input");
  require_rank(weight, 4, "conv2d", "weight");
  if (input.dim(1) != weight.dim(1)) {
    throw ShapeError("conv2d: input " + shape_str(input.shape()) + " has " +
                     std::to_string(input.dim(1)) + " channels but weight " +
                     shape_str(weight.shape()) + " expects " + std::to_string(weight.dim(1)));
  }
  if (bias.shape() != Shape{weight.dim(0)}) {
    throw ShapeError("conv2d: bias " + shape_str(bias.shape()) + " does not match weight " +
                     shape_str(weight.shape()));
  }
  if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), weight.dim(0),
                 weight.dim(2), weight.dim(3), stride, padding, 0, 0};
  if (g.kh > g.height + 2 * padding || g.kw > g.width + 2 * padding) {
    throw ShapeError("conv2d: kernel " + shape_str(weight.shape()) + " larger than padded input " +
                     shape_str(input.shape()));
  }
  g.out_h = (g.height + 2 * padding - g.kh) / stride + 1;
  g.out_w = (g.width + 2 * padding - g.kw) / stride + 1;

  const std::size_t plane = g.out_plane();
  const std::size_t in_size = g.channels * g.height * g.width;
  std::vector<double> out(g.batch * g.kernels * plane);
  std::vector<double> col(g.patch() * plane);
  ConstMatMap w(weight.data().data(), g.kernels, g.patch());
  ConstMatMap colm(col.data(), g.patch(), plane);
  Eigen::Map<const Eigen::VectorXd> b(bias.data().data(), g.kernels);
  for (std::size_t n = 0; n < g.batch; ++n) {
    im2col(g, input.data().data() + n * in_size, col.data());
    MatMap o(out.data() + n * g.kernels * plane, g.kernels, plane);
    o.noalias() = w * colm;
    o.colwise() += b;
  }

  return detail::make_result(
      {g.batch, g.kernels, g.out_h, g.out_w}, std::move(out), {input, weight, bias},
      [g, in_size](Node& self) {
        const std::size_t plane = g.out_plane();
        const Node& x = *self.inputs[0];
        const Node& wn = *self.inputs[1];
        ConstMatMap w(wn.value.data(), g.kernels, g.patch());
        std::vector<double> col(g.patch() * plane);
        std::vector<double> gcol(g.patch() * plane);
        for (std::size_t n = 0; n < g.batch; ++n) {
          ConstMatMap go(self.grad.data() + n * g.kernels * plane, g.kernels, plane);
          if (wants(self, 1)) {
            im2col(g, x.value.data() + n * in_size, col.data());
            MatMap gw(self.inputs[1]->grad.data(), g.kernels, g.patch());
            gw.noalias() += go * ConstMatMap(col.data(), g.patch(), plane).transpose();
          }
          if (wants(self, 2)) {
            Eigen::Map<Eigen::VectorXd> gb(self.inputs[2]->grad.data(), g.kernels);
            gb += go.rowwise().sum();
          }
          if (wants(self, 0)) {
            MatMap gc(gcol.data(), g.patch(), plane);
            gc.noalias() = w.transpose() * go;
            col2im_add(g, gcol.data(), self.inputs[0]->grad.data() + n * in_size);
          }
        }
      });
}

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank(input, 2, "dense", "input");
  require_rank(weight, 2, "dense", "weight");
  if (input.dim(1) != weight.dim(0)) {
    throw ShapeError("dense: input " + shape_str(input.shape()) + " incompatible with weight " +
                     shape_str(weight.shape()));
  }
  if (bias.shape() != Shape{weight.dim(1)}) {
    throw ShapeError("dense: bias " + shape_str(bias.shape()) + " does not match weight " +
                     shape_str(weight.shape()));
  }
  const std::size_t rows = input.dim(0), in_f = weight.dim(0), out_f = weight.dim(1);
  std::vector<double> out(rows * out_f);
  MatMap o(out.data(), rows, out_f);
  o.noalias() = ConstMatMap(input.data().data(), rows, in_f) *
                ConstMatMap(weight.data().data(), in_f, out_f);
  o.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data().data(), out_f);

  return detail::make_result({rows, out_f}, std::move(out), {input, weight, bias},
                             [rows, in_f, out_f](Node& self) {
                               ConstMatMap go(self.grad.data(), rows, out_f);
                               if (wants(self, 0)) {
                                 MatMap gx(self.inputs[0]->grad.data(), rows, in_f);
                                 gx.noalias() +=
                                     go * ConstMatMap(self.inputs[1]->value.data(), in_f, out_f)
                                              .transpose();
                               }
                               if (wants(self, 1)) {
                                 MatMap gw(self.inputs[1]->grad.data(), in_f, out_f);
                                 gw.noalias() +=
                                     ConstMatMap(self.inputs[0]->value.data(), rows, in_f)
                                         .transpose() *
                                     go;
                               }
                               if (wants(self, 2)) {
                                 Eigen::Map<Eigen::RowVectorXd> gb(self.inputs[2]->grad.data(),
                                                                   out_f);
                                 gb += go.colwise().sum();
                               }
                             });
}

Tensor avgpool2d(const Tensor& input, std::size_t k) {
  require_rank(input, 4, "avgpool2d", "input");
  if (k < 1) throw ConfigError("avgpool2d: window must be >= 1");
  const std::size_t nc = input.dim(0) * input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t oh = h / k, ow = w / k;
  if (oh == 0 || ow == 0) {
    throw ShapeError("avgpool2d: window " + std::to_string(k) + " exceeds input " +
                     shape_str(input.shape()));
  }
  const double inv = 1.0 / static_cast<double>(k * k);
  std::vector<double> out(nc * oh * ow, 0.0);
  auto in = input.data();
  for (std::size_t p = 0; p < nc; ++p) {
    for (std::size_t i = 0; i < oh * k; ++i) {
      for (std::size_t j = 0; j < ow * k; ++j) {
        out[(p * oh + i / k) * ow + j / k] += in[(p * h + i) * w + j];
      }
    }
  }
  for (double& v : out) v *= inv;
  return detail::make_result(
      {input.dim(0), input.dim(1), oh, ow}, std::move(out), {input},
      [nc, h, w, oh, ow, k, inv](Node& self) {
        auto& gx = self.inputs[0]->grad;
        for (std::size_t p = 0; p < nc; ++p) {
          for (std::size_t i = 0; i < oh * k; ++i) {
            for (std::size_t j = 0; j < ow * k; ++j) {
              gx[(p * h + i) * w + j] += inv * self.grad[(p * oh + i / k) * ow + j / k];
            }
          }
        }
      });
}

Tensor global_avg_pool(const Tensor& input) {
  require_rank(input, 4, "global_avg_pool", "input");
  const std::size_t b = input.dim(0), c = input.dim(1), plane = input.dim(2) * input.dim(3);
  if (plane == 0) throw ShapeError("global_avg_pool: empty spatial extent");
  const double inv = 1.0 / static_cast<double>(plane);
  std::vector<double> out(b * c);
  auto in = input.data();
  for (std::size_t p = 0; p < b * c; ++p) {
    double s = 0.0;
    for (std::size_t q = 0; q < plane; ++q) s += in[p * plane + q];
    out[p] = s * inv;
  }
  return detail::make_result({b, c}, std::move(out), {input}, [plane, inv](Node& self) {
    auto& gx = self.inputs[0]->grad;
    for (std::size_t p = 0; p < self.grad.size(); ++p) {
      const double g = self.grad[p] * inv;
      for (std::size_t q = 0; q < plane; ++q) gx[p * plane + q] += g;
    }
  });
}

Tensor upsample_nearest2d(const Tensor& input, std::size_t factor) {
  require_rank(input, 4, "upsample_nearest2d", "input");
  if (factor < 1) throw ConfigError("upsample_nearest2d: factor must be >= 1");
  const std::size_t nc = input.dim(0) * input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t oh = h * factor, ow = w * factor;
  std::vector<double> out(nc * oh * ow);
  auto in = input.data();
  for (std::size_t p = 0; p < nc; ++p) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        out[(p * oh + i) * ow + j] = in[(p * h + i / factor) * w + j / factor];
      }
    }
  }
  return detail::make_result({input.dim(0), input.dim(1), oh, ow}, std::move(out), {input},
                             [nc, h, w, oh, ow, factor](Node& self) {
                               auto& gx = self.inputs[0]->grad;
                               for (std::size_t p = 0; p < nc; ++p) {
                                 for (std::size_t i = 0; i < oh; ++i) {
                                   for (std::size_t j = 0; j < ow; ++j) {
                                     gx[(p * h + i / factor) * w + j / factor] +=
                                         self.grad[(p * oh + i) * ow + j];
                                   }
                                 }
                               }
                             });
}

Tensor dropout(const Tensor& input, double p, Mode mode, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ConfigError("dropout: probability must be in [0, 1), got " + std::to_string(p));
  }
  if (mode == Mode::kEval || p == 0.0) return input;
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(input.numel());
  for (double& m : mask) m = rng.uniform() < p ? 0.0 : keep_scale;
  std::vector<double> out(mask.size());
  auto in = input.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] * mask[i];
  return detail::make_result(input.shape(), std::move(out), {input},
                             [mask = std::move(mask)](Node& self) {
                               auto& gx = self.inputs[0]->grad;
                               for (std::size_t i = 0; i < gx.size(); ++i)
                                 gx[i] += self.grad[i] * mask[i];
                             });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 || std::isnan(v) ? v : 0.0; },  // NaN propagates
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor square(const Tensor& x) {
  return unary(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor clamp_log(const Tensor& x, double eps) {
  return unary(
      x, [eps](double v) { return std::log(std::max(v, eps)); },
      [eps](double v, double) { return v > eps ? 1.0 / v : 0.0; });
}

Tensor scale(const Tensor& x, double s) {
  return unary(
      x, [s](double v) { return s * v; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& x, double s) {
  return unary(
      x, [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (!wants(self, k)) continue;
      auto& g = self.inputs[k]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (wants(self, 0)) {
      auto& g = self.inputs[0]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants(self, 1)) {
      auto& g = self.inputs[1]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    if (wants(self, 0)) {
      auto& g = self.inputs[0]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (wants(self, 1)) {
      auto& g = self.inputs[1]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

Tensor lerp(const Tensor& a, const Tensor& b, double lambda) {
  require_same_shape(a, b, "lerp");
  const double mu = 1.0 - lambda;
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = lambda * a[i] + mu * b[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, [lambda, mu](Node& self) {
    if (wants(self, 0)) {
      auto& g = self.inputs[0]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += lambda * self.grad[i];
    }
    if (wants(self, 1)) {
      auto& g = self.inputs[1]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += mu * self.grad[i];
    }
  });
}

Tensor softmax(const Tensor& logits) {
  require_rank(logits, 2, "softmax", "logits");
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  std::vector<double> out(rows * cols);
  auto in = logits.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in.data() + r * cols;
    double* y = out.data() + r * cols;
    const double m = *std::max_element(x, x + cols);
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += (y[c] = std::exp(x[c] - m));
    for (std::size_t c = 0; c < cols; ++c) y[c] /= s;
  }
  return detail::make_result(logits.shape(), std::move(out), {logits}, [rows, cols](Node& self) {
    auto& gx = self.inputs[0]->grad;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * cols;
      const double* g = self.grad.data() + r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += g[c] * y[c];
      for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += y[c] * (g[c] - dot);
    }
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return detail::make_result({}, {s}, {x}, [](Node& self) {
    auto& g = self.inputs[0]->grad;
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
  if (x.rank() < 1) throw ShapeError("gather_rows: scalar input");
  const std::size_t rows = x.dim(0);
  const std::size_t row_size = rows == 0 ? 0 : x.numel() / rows;
  for (std::size_t i : index) {
    if (i >= rows) {
      throw ShapeError("gather_rows: index " + std::to_string(i) + " out of range for " +
                       shape_str(x.shape()));
    }
  }
  Shape shape = x.shape();
  shape[0] = index.size();
  std::vector<double> out(index.size() * row_size);
  auto in = x.data();
  for (std::size_t r = 0; r < index.size(); ++r) {
    std::copy_n(in.begin() + static_cast<long>(index[r] * row_size), row_size,
                out.begin() + static_cast<long>(r * row_size));
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return detail::make_result(std::move(shape), std::move(out), {x},
                             [idx = std::move(idx), row_size](Node& self) {
                               auto& g = self.inputs[0]->grad;
                               for (std::size_t r = 0; r < idx.size(); ++r) {
                                 for (std::size_t q = 0; q < row_size; ++q) {
                                   g[idx[r] * row_size + q] += self.grad[r * row_size + q];
                                 }
                               }
                             });
}

}  // namespace mixvae
