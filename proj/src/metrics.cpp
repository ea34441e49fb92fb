#include "mixvae/metrics.hpp"

#include <algorithm>
#include <sstream>

#include "mixvae/csv.hpp"
#include "mixvae/errors.hpp"

namespace mixvae {

std::vector<int> argmax_rows(const Tensor& probs) {
  if (probs.rank() != 2 || probs.dim(1) != 4) {
    throw ShapeError("expected [N,4] probabilities, got " + shape_str(probs.shape()));
  }
  std::vector<int> out(probs.dim(0));
  auto v = probs.data();
  for (std::size_t r = 0; r < out.size(); ++r) {
    int best = 0;
    for (int c = 1; c < 4; ++c) {
      if (v[r * 4 + static_cast<std::size_t>(c)] > v[r * 4 + static_cast<std::size_t>(best)]) best = c;
    }
    out[r] = best;
  }
  return out;
}

EvalReport evaluate_predictions(std::span<const int> predictions, std::span<const int> truths) {
  if (truths.empty()) throw DataError("evaluate: no samples");
  if (predictions.size() != truths.size()) {
    throw ShapeError("evaluate: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(truths.size()) + " truths");
  }
  EvalReport r;
  r.count = truths.size();
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const int t = truths[i], p = predictions[i];
    if (t < 0 || t > 3 || p < 0 || p > 3) throw DataError("evaluate: class id out of range at " + std::to_string(i));
    ++r.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  std::size_t correct = 0;
  double f1_sum = 0.0, occupied_sum = 0.0;
  std::size_t occupied = 0;
  for (std::size_t c = 0; c < 4; ++c) {
    const std::size_t tp = r.confusion[c][c];
    std::size_t predicted = 0, actual = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      predicted += r.confusion[k][c];
      actual += r.confusion[c][k];
    }
    correct += tp;
    r.support[c] = actual;
    r.precision[c] = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    r.recall[c] = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
    const double pr = r.precision[c] + r.recall[c];
    r.per_class_f1[c] = pr > 0.0 ? 2.0 * r.precision[c] * r.recall[c] / pr : 0.0;
    r.weighted_f1 += static_cast<double>(actual) / static_cast<double>(r.count) * r.per_class_f1[c];
    f1_sum += r.per_class_f1[c];
    if (predicted + actual > 0) {
      occupied_sum += r.per_class_f1[c];
      ++occupied;
    }
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.count);
  r.macro_f1 = f1_sum / 4.0;
  r.macro_f1_occupied = occupied_sum / static_cast<double>(occupied);
  return r;
}

EvalReport evaluate(const Tensor& probs, std::span<const int> truths) {
  if (probs.rank() == 2 && probs.dim(0) == 0) throw DataError("evaluate: no samples");
  const auto preds = argmax_rows(probs);
  return evaluate_predictions(preds, truths);
}

Tensor ensemble_probs(std::span<const Tensor> members) {
  if (members.empty()) throw UsageError("ensemble_probs: no members");
  const Shape& shape = members.front().shape();
  for (const auto& m : members) {
    if (m.shape() != shape) {
      throw ShapeError("ensemble_probs: member shape " + shape_str(m.shape()) + " vs " + shape_str(shape));
    }
  }
  const std::size_t n = members.front().numel();
  std::vector<double> out(n), column(members.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < members.size(); ++m) column[m] = members[m][i];
    std::sort(column.begin(), column.end());
    double avg = 0.0;
    for (std::size_t m = 0; m < column.size(); ++m) {
      avg += (column[m] - avg) / static_cast<double>(m + 1);
    }
    out[i] = avg;
  }
  return Tensor::from(shape, std::move(out));
}

std::string report_json(const EvalReport& r) {
  auto f6 = [](double v) { return csv::fixed(v, 6); };
  auto array = [&](const auto& values, auto fmt) {
    std::string s = "[";
    for (std::size_t i = 0; i < values.size(); ++i) s += (i ? ", " : "") + fmt(values[i]);
    return s + "]";
  };
  auto count = [](std::size_t v) { return std::to_string(v); };
  std::ostringstream os;
  os << "{\n";
  os << "  \"count\": " << r.count << ",\n";
  os << "  \"accuracy\": " << f6(r.accuracy) << ",\n";
  os << "  \"weighted_f1\": " << f6(r.weighted_f1) << ",\n";
  os << "  \"macro_f1\": " << f6(r.macro_f1) << ",\n";
  os << "  \"macro_f1_occupied\": " << f6(r.macro_f1_occupied) << ",\n";
  os << "  \"per_class_f1\": " << array(r.per_class_f1, f6) << ",\n";
  os << "  \"precision\": " << array(r.precision, f6) << ",\n";
  os << "  \"recall\": " << array(r.recall, f6) << ",\n";
  os << "  \"support\": " << array(r.support, count) << ",\n";
  os << "  \"confusion\": [\n";
  for (std::size_t t = 0; t < 4; ++t) {
    os << "    " << array(r.confusion[t], count) << (t + 1 < 4 ? ",\n" : "\n");
  }
  os << "  ]\n}\n";
  return os.str();
}

std::string report_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "metric,value\n";
  os << "count," << r.count << '\n';
  os << "accuracy," << csv::fixed(r.accuracy, 6) << '\n';
  os << "weighted_f1," << csv::fixed(r.weighted_f1, 6) << '\n';
  os << "macro_f1," << csv::fixed(r.macro_f1, 6) << '\n';
  os << "macro_f1_occupied," << csv::fixed(r.macro_f1_occupied, 6) << '\n';
  for (std::size_t c = 0; c < 4; ++c) {
    os << "f1_" << c << ',' << csv::fixed(r.per_class_f1[c], 6) << '\n';
    os << "support_" << c << ',' << r.support[c] << '\n';
  }
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t p = 0; p < 4; ++p) os << "confusion_" << t << '_' << p << ',' << r.confusion[t][p] << '\n';
  return os.str();
}

}  // namespace mixvae
