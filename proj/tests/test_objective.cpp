#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mixvae/errors.hpp"
#include "mixvae/model.hpp"
#include "mixvae/objective.hpp"
#include "support.hpp"

using namespace mixvae;
using support::random_tensor;

namespace {

// KL(q || N(0, I)) = E_q[log q(z) - log p(z)], estimated with an rng
// independent of the library's.
double monte_carlo_kl(const std::vector<double>& mu, const std::vector<double>& logvar, int samples,
                      std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double acc = 0.0;
  for (int s = 0; s < samples; ++s) {
    double log_ratio = 0.0;
    for (std::size_t d = 0; d < mu.size(); ++d) {
      const double sd = std::exp(0.5 * logvar[d]);
      const double e = normal(gen);
      const double z = mu[d] + sd * e;
      const double log_q = -0.5 * e * e - std::log(sd);
      const double log_p = -0.5 * z * z;
      log_ratio += log_q - log_p;
    }
    acc += log_ratio;
  }
  return acc / samples;
}

double direct_ce(const std::vector<double>& p, const std::vector<double>& y, std::size_t b, double eps) {
  double s = 0.0;
  for (std::size_t n = 0; n < b; ++n)
    for (std::size_t c = 0; c < 4; ++c) s += y[n * 4 + c] * std::log(std::max(p[n * 4 + c], eps));
  return -s / static_cast<double>(b);
}

ForwardOutput fake_forward(const Tensor& logits, const Tensor& recon, const LatentDistribution& latent) {
  ForwardOutput f;
  f.logits = logits;
  f.probs = softmax(logits);
  f.latent = latent;
  f.z = latent.mu;
  f.reconstruction = recon;
  return f;
}

}  // namespace

TEST_CASE("recon_mse") {
  Rng rng(1);
  const Tensor t = random_tensor({2, 3, 4, 4}, rng, 0, 1, false);
  CHECK(recon_mse(t, t).item() == 0.0);
  CHECK(recon_mse(Tensor::full({2, 3, 4, 4}, 1.0), Tensor::zeros({2, 3, 4, 4})).item() == 1.0);
  CHECK_THROWS_AS(recon_mse(t, Tensor::zeros({2, 3, 4, 5})), ShapeError);

  Tensor r = random_tensor({2, 3, 4, 4}, rng, 0, 1, true);
  recon_mse(r, t).backward();
  for (std::size_t i = 0; i < r.numel(); ++i) {
    CHECK(r.grad()[i] == doctest::Approx(2.0 * (r[i] - t[i]) / 96.0).epsilon(1e-12));
  }
  const auto rep = support::fd_check([&] { return recon_mse(r, t); }, {r});
  CHECK(rep.ok());
}

TEST_CASE("kl examples") {
  CHECK(kl_diag_gaussian({Tensor::zeros({3, 5}), Tensor::zeros({3, 5})}).item() == 0.0);
  const double a = kl_diag_gaussian({Tensor::from({1, 2}, {1, 0}), Tensor::zeros({1, 2})}).item();
  CHECK(a == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(monte_carlo_kl({1, 0}, {0, 0}, 1000000, 1) - 0.5) < 0.01);
  const double b = kl_diag_gaussian({Tensor::zeros({1, 1}), Tensor::from({1, 1}, {std::log(4.0)})}).item();
  CHECK(b == doctest::Approx(0.5 * (4.0 - 1.0 - std::log(4.0))).epsilon(1e-14));
  CHECK(std::abs(b - 0.8069) < 1e-4);
  CHECK(std::abs(monte_carlo_kl({0}, {std::log(4.0)}, 1000000, 2) - b) < 0.01);
}

TEST_CASE("kl averages over the batch") {
  const Tensor mu = Tensor::from({2, 1}, {1, 3});
  const double kl = kl_diag_gaussian({mu, Tensor::zeros({2, 1})}).item();
  CHECK(kl == doctest::Approx((0.5 * 1 + 0.5 * 9) / 2.0).epsilon(1e-15));
}

TEST_CASE("kl is non-negative on 10^4 random inputs") {
  Rng rng(2);
  for (int i = 0; i < 10000; ++i) {
    const std::size_t b = 1 + rng.uniform_index(3), d = 1 + rng.uniform_index(4);
    const double kl = kl_diag_gaussian({random_tensor({b, d}, rng, -3, 3, false), random_tensor({b, d}, rng, -5, 5, false)}).item();
    CHECK(kl >= 0.0);
  }
}

TEST_CASE("kl gradient matches finite differences") {
  Rng rng(3);
  Tensor mu = random_tensor({3, 4}, rng);
  Tensor lv = random_tensor({3, 4}, rng);
  const auto rep = support::fd_check([&] { return kl_diag_gaussian({mu, lv}); }, {mu, lv});
  CHECK(rep.ok());
}

TEST_CASE("supervised loss examples") {
  const Tensor onehot = Tensor::from({1, 4}, {0, 0, 1, 0});
  CHECK(supervised_loss(onehot, onehot).item() == 0.0);
  const Tensor uniform = Tensor::full({2, 4}, 0.25);
  const Tensor soft = Tensor::from({2, 4}, {0.1, 0.2, 0.3, 0.4, 0, 1, 0, 0});
  CHECK(supervised_loss(uniform, soft).item() == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  const double eps = 1e-12;
  const Tensor p = Tensor::from({1, 4}, {0.5 + eps, 0.5 + eps, eps, eps});
  const Tensor y = Tensor::from({1, 4}, {0.5, 0.5, 0, 0});
  CHECK(supervised_loss(p, y).item() == doctest::Approx(std::numbers::ln2).epsilon(1e-9));
  CHECK_THROWS_AS(supervised_loss(uniform, Tensor::from({2, 4}, {-0.1, 0.6, 0.3, 0.2, 0, 1, 0, 0})), ConfigError);
  CHECK_THROWS_AS(supervised_loss(uniform, Tensor::zeros({2, 3})), ShapeError);
}

TEST_CASE("supervised loss equals the direct summation oracle") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t b = 1 + rng.uniform_index(8);
    const Tensor p = softmax(random_tensor({b, 4}, rng, -6, 6, false));
    std::vector<double> y(b * 4);
    for (std::size_t n = 0; n < b; ++n) {
      double s = 0;
      for (std::size_t c = 0; c < 4; ++c) s += y[n * 4 + c] = rng.uniform();
      for (std::size_t c = 0; c < 4; ++c) y[n * 4 + c] /= s;
    }
    const double got = supervised_loss(p, Tensor::from({b, 4}, y)).item();
    const double want = direct_ce(std::vector<double>(p.data().begin(), p.data().end()), y, b, 1e-12);
    CHECK(std::abs(got - want) <= 1e-9);
    CHECK(got >= 0.0);
  }
}

TEST_CASE("binary mode adds the complement term") {
  const Tensor p = Tensor::from({1, 4}, {0.7, 0.1, 0.1, 0.2});
  const Tensor y = Tensor::from({1, 4}, {1, 0, 0, 0});
  const double want = -(std::log(0.7) + std::log(0.9) + std::log(0.9) + std::log(0.8));
  CHECK(supervised_loss(p, y, SupervisedMode::kBinary).item() == doctest::Approx(want).epsilon(1e-14));
  Tensor q = Tensor::from({2, 4}, {0.3, 0.6, 0.2, 0.4, 0.5, 0.5, 0.9, 0.1}, true);
  const Tensor t = Tensor::from({2, 4}, {0.5, 0.5, 0, 0, 0, 0, 1, 0});
  const auto rep = support::fd_check([&] { return supervised_loss(q, t, SupervisedMode::kBinary); }, {q});
  CHECK(rep.ok());
}

TEST_CASE("supervised gradient through softmax matches finite differences") {
  Rng rng(5);
  Tensor logits = random_tensor({3, 4}, rng, -2, 2);
  const Tensor y = Tensor::from({3, 4}, {0.2, 0.8, 0, 0, 0, 0, 1, 0, 0.25, 0.25, 0.25, 0.25});
  const auto rep = support::fd_check([&] { return supervised_loss(softmax(logits), y); }, {logits});
  CHECK(rep.ok());
}

TEST_CASE("total loss") {
  Rng rng(6);
  SUBCASE("all terms at their minimum give zero") {
    const Tensor target = random_tensor({2, 3, 4, 4}, rng, 0.1, 0.9, false);
    const Tensor logits = Tensor::from({2, 4}, {800, 0, 0, 0, 0, 0, 0, 800});
    const ForwardOutput f = fake_forward(logits, target, {Tensor::zeros({2, 3}), Tensor::zeros({2, 3})});
    const LossTerms t = total_loss(f, Tensor::from({2, 4}, {1, 0, 0, 0, 0, 0, 0, 1}), target);
    CHECK(t.total.item() == 0.0);
  }
  SUBCASE("total is the sum of independently computed terms") {
    for (int trial = 0; trial < 50; ++trial) {
      const Tensor recon = random_tensor({2, 3, 4, 4}, rng, 0, 1, false);
      const Tensor target = random_tensor({2, 3, 4, 4}, rng, 0, 1, false);
      const LatentDistribution lat{random_tensor({2, 3}, rng, -1, 1, false), random_tensor({2, 3}, rng, -1, 1, false)};
      const Tensor logits = random_tensor({2, 4}, rng, -3, 3, false);
      const Tensor y = Tensor::from({2, 4}, {0.3, 0.7, 0, 0, 0, 0, 0, 1});
      const LossBreakdown l = total_loss(fake_forward(logits, recon, lat), y, target).values();
      const double r = recon_mse(recon, target).item();
      const double k = kl_diag_gaussian(lat).item();
      const double s = supervised_loss(softmax(logits), y).item();
      CHECK(l.recon == r);
      CHECK(l.kl == k);
      CHECK(l.supervised == s);
      CHECK(std::abs(l.total - (r + k + s)) <= 1e-9);
      CHECK(l.recon >= 0.0);
      CHECK(l.kl >= 0.0);
      CHECK(l.supervised >= 0.0);
    }
  }
  SUBCASE("lowering one term with the others fixed lowers the total") {
    const Tensor target = random_tensor({1, 3, 2, 2}, rng, 0, 1, false);
    const Tensor logits = random_tensor({1, 4}, rng, -1, 1, false);
    const Tensor y = Tensor::from({1, 4}, {0, 1, 0, 0});
    const LatentDistribution lat{Tensor::from({1, 2}, {0.5, -0.2}), Tensor::from({1, 2}, {0.1, 0.3})};
    const Tensor far = add_scalar(target, 0.3);
    const Tensor near = add_scalar(target, 0.1);
    const double a = total_loss(fake_forward(logits, far, lat), y, target).values().total;
    const double b = total_loss(fake_forward(logits, near, lat), y, target).values().total;
    CHECK(b < a);
    const LatentDistribution closer{Tensor::from({1, 2}, {0.25, -0.1}), lat.logvar};
    const double c = total_loss(fake_forward(logits, near, closer), y, target).values().total;
    CHECK(c < b);
    const Tensor better = Tensor::from({1, 4}, {logits[0], logits[1] + 1.0, logits[2], logits[3]});
    CHECK(total_loss(fake_forward(better, near, closer), y, target).values().total < c);
  }
  SUBCASE("weights scale their terms") {
    ObjectiveConfig cfg;
    cfg.recon_weight = 2.0;
    cfg.kl_weight = 0.5;
    cfg.supervised_weight = 3.0;
    const Tensor recon = random_tensor({1, 3, 2, 2}, rng, 0, 1, false);
    const Tensor target = random_tensor({1, 3, 2, 2}, rng, 0, 1, false);
    const LatentDistribution lat{random_tensor({1, 2}, rng, -1, 1, false), random_tensor({1, 2}, rng, -1, 1, false)};
    const Tensor y = Tensor::from({1, 4}, {0, 0, 1, 0});
    const LossBreakdown l = total_loss(fake_forward(random_tensor({1, 4}, rng, -1, 1, false), recon, lat), y, target, cfg).values();
    CHECK(std::abs(l.total - (2.0 * l.recon + 0.5 * l.kl + 3.0 * l.supervised)) <= 1e-12);
  }
  SUBCASE("models without a VAE branch contribute only the supervised term") {
    ForwardOutput f;
    f.logits = random_tensor({2, 4}, rng, -1, 1, false);
    f.probs = softmax(f.logits);
    const Tensor y = Tensor::from({2, 4}, {1, 0, 0, 0, 0, 1, 0, 0});
    const LossBreakdown l = total_loss(f, y, Tensor()).values();
    CHECK(l.recon == 0.0);
    CHECK(l.kl == 0.0);
    CHECK(l.total == l.supervised);
  }
}

TEST_CASE("unsupervised part moves with recon + kl") {
  Rng rng(7);
  const Tensor target = random_tensor({1, 3, 2, 2}, rng, 0, 1, false);
  const Tensor logits = Tensor::from({1, 4}, {0.1, 0.2, 0.3, 0.4});
  const Tensor y = Tensor::from({1, 4}, {0, 1, 0, 0});
  for (int trial = 0; trial < 100; ++trial) {
    auto sample = [&] {
      return std::pair{random_tensor({1, 3, 2, 2}, rng, 0, 1, false),
                       LatentDistribution{random_tensor({1, 2}, rng, -2, 2, false), random_tensor({1, 2}, rng, -2, 2, false)}};
    };
    const auto [r1, l1] = sample();
    const auto [r2, l2] = sample();
    const LossBreakdown a = total_loss(fake_forward(logits, r1, l1), y, target).values();
    const LossBreakdown b = total_loss(fake_forward(logits, r2, l2), y, target).values();
    CHECK(((a.total - a.supervised) < (b.total - b.supervised)) == ((a.recon + a.kl) < (b.recon + b.kl)));
  }
}
