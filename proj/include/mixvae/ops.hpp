#pragma once

#include <cstddef>
#include <span>

#include "mixvae/rng.hpp"
#include "mixvae/tensor.hpp"

namespace mixvae {

enum class Mode { kTrain, kEval };

// Layers. Image tensors are NCHW.

/// 2-D cross-correlation. input [B,C,H,W], weight [K,C,kh,kw], bias [K].
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding);
/// input [B,F] x weight [F,G] + bias [G].
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);
/// Non-overlapping k x k mean pooling; trailing rows/cols that do not fill a window are dropped.
Tensor avgpool2d(const Tensor& input, std::size_t k);
/// [B,C,H,W] -> [B,C] spatial mean.
Tensor global_avg_pool(const Tensor& input);
Tensor upsample_nearest2d(const Tensor& input, std::size_t factor);
/// Inverted dropout: train mode zeroes with probability p and scales survivors by 1/(1-p).
Tensor dropout(const Tensor& input, double p, Mode mode, Rng& rng);

// Elementwise.

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor square(const Tensor& x);
/// log(max(x, eps)); the gradient is zero where the clamp is active.
Tensor clamp_log(const Tensor& x, double eps);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);
Tensor add_scalar(const Tensor& x, double s);
/// lambda * a + (1 - lambda) * b
Tensor lerp(const Tensor& a, const Tensor& b, double lambda);

// Reductions and indexing.

/// Row softmax over the last axis of a [B,C] tensor.
Tensor softmax(const Tensor& logits);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Rows of x (axis 0) in the given order: out[i] = x[index[i]].
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index);

}  // namespace mixvae
