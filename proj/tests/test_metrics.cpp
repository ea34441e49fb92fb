#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mixvae/errors.hpp"
#include "mixvae/metrics.hpp"
#include "support.hpp"

using namespace mixvae;

namespace {

/// Independent TP/FP/FN counter.
struct Oracle {
  double accuracy, weighted_f1, macro_f1;
  std::array<double, 4> f1;
};

Oracle brute_force(const std::vector<int>& pred, const std::vector<int>& truth) {
  Oracle o{};
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += pred[i] == truth[i];
  o.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  for (int c = 0; c < 4; ++c) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (pred[i] == c && truth[i] == c) ++tp;
      else if (pred[i] == c) ++fp;
      else if (truth[i] == c) ++fn;
    }
    const double p = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double r = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    o.f1[c] = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    o.weighted_f1 += static_cast<double>(tp + fn) / static_cast<double>(truth.size()) * o.f1[c];
    o.macro_f1 += o.f1[c];
  }
  o.macro_f1 /= 4.0;
  return o;
}

Tensor random_probs(std::size_t n, Rng& rng) {
  std::vector<double> v(n * 4);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0;
    for (std::size_t k = 0; k < 4; ++k) s += v[r * 4 + k] = rng.uniform(0.01, 1.0);
    for (std::size_t k = 0; k < 4; ++k) v[r * 4 + k] /= s;
  }
  return Tensor::from({n, 4}, std::move(v));
}

}  // namespace

TEST_CASE("worked example") {
  const std::vector<int> truth{0, 0, 1, 1}, pred{0, 1, 1, 1};
  const EvalReport r = evaluate_predictions(pred, truth);
  CHECK(r.accuracy == 0.75);
  CHECK(r.per_class_f1[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(r.per_class_f1[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(std::abs(r.weighted_f1 - 0.7333) < 5e-5);
  CHECK(std::abs(r.macro_f1_occupied - 0.7333) < 5e-5);
  // Averaged over all four classes, the two absent ones pull macro F1 down.
  CHECK(r.macro_f1 == doctest::Approx((2.0 / 3.0 + 0.8) / 4.0).epsilon(1e-15));
  CHECK(r.confusion[0][1] == 1);
  CHECK(r.support == std::array<std::size_t, 4>{2, 2, 0, 0});

  const Tensor probs = Tensor::from({4, 4}, {0.7, 0.1, 0.1, 0.1, 0.2, 0.6, 0.1, 0.1, 0, 1, 0, 0, 0.1, 0.5, 0.2, 0.2});
  CHECK(report_json(evaluate(probs, truth)) == report_json(r));
}

TEST_CASE("perfect predictions") {
  const std::vector<int> truth{0, 1, 2, 3, 3, 2};
  const EvalReport r = evaluate_predictions(truth, truth);
  CHECK(r.accuracy == 1.0);
  CHECK(r.weighted_f1 == 1.0);
  CHECK(r.macro_f1 == 1.0);
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t p = 0; p < 4; ++p) CHECK((r.confusion[t][p] != 0) == (t == p));
  }
}

TEST_CASE("a class absent from truths and predictions scores F1 = 0 with no weight") {
  const std::vector<int> truth{0, 1, 2, 0}, pred{0, 1, 2, 0};
  const EvalReport r = evaluate_predictions(pred, truth);
  CHECK(r.per_class_f1[3] == 0.0);
  CHECK(r.weighted_f1 == 1.0);
  CHECK(r.macro_f1 == 0.75);
  CHECK(r.macro_f1_occupied == 1.0);
}

TEST_CASE("argmax ties go to the lowest class") {
  const Tensor p = Tensor::from({2, 4}, {0.25, 0.25, 0.25, 0.25, 0.1, 0.4, 0.4, 0.1});
  CHECK(argmax_rows(p) == std::vector<int>{0, 1});
  CHECK_THROWS_AS(argmax_rows(Tensor::zeros({2, 3})), ShapeError);
}

TEST_CASE("evaluate agrees exactly with a brute-force counter on 1000 random sets") {
  Rng rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(60);
    // Skewed class draws so some classes are often absent.
    const std::size_t classes = 1 + rng.uniform_index(4);
    std::vector<int> truth(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<int>(rng.uniform_index(classes));
      pred[i] = rng.uniform() < 0.6 ? truth[i] : static_cast<int>(rng.uniform_index(4));
    }
    const EvalReport r = evaluate_predictions(pred, truth);
    const Oracle o = brute_force(pred, truth);
    CHECK(r.accuracy == o.accuracy);
    CHECK(r.weighted_f1 == o.weighted_f1);
    CHECK(r.macro_f1 == o.macro_f1);
    for (int c = 0; c < 4; ++c) CHECK(r.per_class_f1[c] == o.f1[c]);
    std::size_t total = 0;
    for (const auto& row : r.confusion) {
      for (auto v : row) total += v;
    }
    CHECK(total == n);
  }
}

TEST_CASE("metric errors") {
  const std::vector<int> none;
  CHECK_THROWS_AS(evaluate_predictions(none, none), DataError);
  CHECK_THROWS_AS(evaluate(Tensor::zeros({0, 4}), none), DataError);
  const std::vector<int> two{0, 1}, one{0};
  CHECK_THROWS_AS(evaluate_predictions(one, two), ShapeError);
  const std::vector<int> bad{4};
  CHECK_THROWS_AS(evaluate_predictions(bad, one), DataError);
}

TEST_CASE("ensemble averaging") {
  SUBCASE("midpoint example") {
    const std::vector<Tensor> m{Tensor::from({1, 4}, {0.6, 0.4, 0, 0}), Tensor::from({1, 4}, {0.2, 0.8, 0, 0})};
    const Tensor avg = ensemble_probs(m);
    CHECK(avg[0] == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(avg[1] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(avg[2] == 0.0);
  }
  SUBCASE("single member and identical members reproduce themselves") {
    Rng rng(1);
    const Tensor p = random_probs(30, rng);
    CHECK(support::bit_equal(ensemble_probs(std::vector<Tensor>{p}).data(), p.data()));
    CHECK(support::bit_equal(ensemble_probs(std::vector<Tensor>{p, p, p, p}).data(), p.data()));
  }
  SUBCASE("rows still sum to one and order does not matter") {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<Tensor> m;
      const std::size_t k = 1 + rng.uniform_index(6);
      for (std::size_t i = 0; i < k; ++i) m.push_back(random_probs(10, rng));
      const Tensor avg = ensemble_probs(m);
      for (std::size_t r = 0; r < 10; ++r) {
        double s = 0;
        for (std::size_t c = 0; c < 4; ++c) s += avg[r * 4 + c];
        CHECK(std::abs(s - 1.0) <= 1e-12);
      }
      auto shuffled = m;
      rng.shuffle(shuffled.begin(), shuffled.end());
      CHECK(support::bit_equal(ensemble_probs(shuffled).data(), avg.data()));
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(ensemble_probs(std::vector<Tensor>{}), UsageError);
    CHECK_THROWS_AS(ensemble_probs(std::vector<Tensor>{Tensor::zeros({2, 4}), Tensor::zeros({3, 4})}), ShapeError);
  }
}

TEST_CASE("report serialization") {
  const std::vector<int> truth{0, 0, 1, 1}, pred{0, 1, 1, 1};
  const EvalReport r = evaluate_predictions(pred, truth);
  const std::string json = report_json(r);
  CHECK(json == report_json(evaluate_predictions(pred, truth)));
  CHECK(json.find("\"accuracy\": 0.750000") != std::string::npos);
  CHECK(json.find("\"weighted_f1\": 0.733333") != std::string::npos);
  CHECK(json.find("\"macro_f1\": 0.366667") != std::string::npos);
  CHECK(json.find("\"support\": [2, 2, 0, 0]") != std::string::npos);
  const std::string csv = report_csv(r);
  CHECK(csv.rfind("metric,value\ncount,4\naccuracy,0.750000\n", 0) == 0);
  CHECK(csv.find("confusion_0_1,1\n") != std::string::npos);
}
