#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mixvae/rng.hpp"
#include "mixvae/tensor.hpp"

namespace support {

using mixvae::Rng;
using mixvae::Shape;
using mixvae::Tensor;

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = true) {
  std::vector<double> v(mixvae::shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(shape, std::move(v), requires_grad);
}

inline Shape random_shape(Rng& rng, std::size_t rank, std::size_t lo, std::size_t hi) {
  Shape s(rank);
  for (auto& d : s) d = lo + rng.uniform_index(hi - lo + 1);
  return s;
}

struct FdTolerance {
  double eps = 1e-6;
  double rel = 1e-3;
  double abs_floor = 1e-5;
};

struct FdReport {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double worst_ratio = 0.0;  // max |a - n| / allowed
  std::string worst;

  bool ok() const { return checked > 0 && failures == 0; }
};

inline bool fd_agrees(double analytic, double numeric, const FdTolerance& tol, double* ratio = nullptr) {
  const double allowed = std::max(tol.rel * std::max(std::abs(analytic), std::abs(numeric)), tol.abs_floor);
  const double r = std::abs(analytic - numeric) / allowed;
  if (ratio) *ratio = r;
  return r <= 1.0;
}

/// Central finite differences of `loss()` against reverse-mode gradients for
/// every element of every leaf (or `per_leaf` random elements of each when
/// set). `loss` must rebuild the graph from the leaves on each call and be
/// deterministic.
inline FdReport fd_check(const std::function<Tensor()>& loss, std::vector<Tensor> leaves,
                         const FdTolerance& tol = {}, std::size_t per_leaf = 0, Rng* pick = nullptr) {
  for (auto& l : leaves) l.zero_grad();
  loss().backward();
  std::vector<std::vector<double>> analytic;
  for (auto& l : leaves) {
    analytic.emplace_back(l.has_grad() ? std::vector<double>(l.grad().begin(), l.grad().end())
                                       : std::vector<double>(l.numel(), 0.0));
  }
  FdReport rep;
  mixvae::NoGradGuard no_grad;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto data = leaves[li].mutable_data();
    std::vector<std::size_t> idx;
    if (per_leaf == 0 || per_leaf >= data.size() || pick == nullptr) {
      for (std::size_t i = 0; i < data.size(); ++i) idx.push_back(i);
    } else {
      for (std::size_t k = 0; k < per_leaf; ++k) idx.push_back(pick->uniform_index(data.size()));
    }
    for (std::size_t i : idx) {
      const double orig = data[i];
      data[i] = orig + tol.eps;
      const double fp = loss().item();
      data[i] = orig - tol.eps;
      const double fm = loss().item();
      data[i] = orig;
      const double numeric = (fp - fm) / (2.0 * tol.eps);
      double ratio = 0.0;
      ++rep.checked;
      if (!fd_agrees(analytic[li][i], numeric, tol, &ratio)) ++rep.failures;
      if (ratio > rep.worst_ratio) {
        rep.worst_ratio = ratio;
        rep.worst = "leaf " + std::to_string(li) + " element " + std::to_string(i) + ": analytic " +
                    std::to_string(analytic[li][i]) + " numeric " + std::to_string(numeric);
      }
    }
  }
  return rep;
}

/// Directional check over all leaves at once: grad . v against
/// (L(x + eps v) - L(x - eps v)) / (2 eps) for a random unit direction v.
inline bool fd_directional(const std::function<Tensor()>& loss, std::vector<Tensor> leaves, Rng& rng,
                           const FdTolerance& tol, double* analytic_out = nullptr,
                           double* numeric_out = nullptr) {
  for (auto& l : leaves) l.zero_grad();
  loss().backward();
  std::vector<std::vector<double>> dir;
  double norm2 = 0.0;
  for (auto& l : leaves) {
    std::vector<double> d(l.numel());
    for (double& x : d) {
      x = rng.normal();
      norm2 += x * x;
    }
    dir.push_back(std::move(d));
  }
  const double inv = 1.0 / std::sqrt(norm2);
  double analytic = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    for (std::size_t i = 0; i < dir[li].size(); ++i) {
      dir[li][i] *= inv;
      if (leaves[li].has_grad()) analytic += leaves[li].grad()[i] * dir[li][i];
    }
  }
  mixvae::NoGradGuard no_grad;
  auto shift = [&](double s) {
    for (std::size_t li = 0; li < leaves.size(); ++li) {
      auto data = leaves[li].mutable_data();
      for (std::size_t i = 0; i < data.size(); ++i) data[i] += s * dir[li][i];
    }
  };
  std::vector<std::vector<double>> saved;
  for (auto& l : leaves) saved.emplace_back(l.data().begin(), l.data().end());
  auto restore = [&] {
    for (std::size_t li = 0; li < leaves.size(); ++li) {
      std::copy(saved[li].begin(), saved[li].end(), leaves[li].mutable_data().begin());
    }
  };
  shift(tol.eps);
  const double fp = loss().item();
  restore();
  shift(-tol.eps);
  const double fm = loss().item();
  restore();
  const double numeric = (fp - fm) / (2.0 * tol.eps);
  if (analytic_out) *analytic_out = analytic;
  if (numeric_out) *numeric_out = numeric;
  return fd_agrees(analytic, numeric, tol);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline bool bit_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](double x, double y) {
           return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
         });
}

}  // namespace support
