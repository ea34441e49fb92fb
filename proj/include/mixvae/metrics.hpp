#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mixvae/tensor.hpp"

namespace mixvae {

using ConfusionMatrix = std::array<std::array<std::size_t, 4>, 4>;  // [truth][prediction]

struct EvalReport {
  std::size_t count = 0;
  ConfusionMatrix confusion{};
  std::array<std::size_t, 4> support{};
  std::array<double, 4> precision{};
  std::array<double, 4> recall{};
  std::array<double, 4> per_class_f1{};
  double accuracy = 0.0;
  /// sum_c (support_c / N) * F1_c
  double weighted_f1 = 0.0;
  /// Mean of F1 over all four classes; absent classes count as F1 = 0.
  double macro_f1 = 0.0;
  /// Mean of F1 over classes that occur in the truths or the predictions.
  double macro_f1_occupied = 0.0;
};

/// Row-wise argmax; ties resolve to the lowest class index.
std::vector<int> argmax_rows(const Tensor& probs);

/// Metrics for predicted class ids. F1 is 0 whenever precision + recall is 0.
EvalReport evaluate_predictions(std::span<const int> predictions, std::span<const int> truths);
/// Metrics for a [N,4] probability matrix (prediction = argmax per row).
EvalReport evaluate(const Tensor& probs, std::span<const int> truths);

/// Equal-weight average of member probability matrices. Each element is
/// averaged over its member values in sorted order, so the result does not
/// depend on member order and identical members reproduce themselves exactly.
Tensor ensemble_probs(std::span<const Tensor> members);

/// JSON document with the confusion matrix and all scores at 6 decimals.
std::string report_json(const EvalReport& report);
/// Flat `metric,value` CSV of the same content.
std::string report_csv(const EvalReport& report);

}  // namespace mixvae
