#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "helpers.hpp"
#include "sentinel/lstm.hpp"

using namespace sentinel;

namespace {

std::vector<Window> random_batch(std::uint64_t seed, std::size_t n, std::size_t steps) {
  std::mt19937_64 rng(seed);
  std::vector<Window> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(testing::random_window(rng, steps, int(i % 2)));
  return out;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

}  // namespace

TEST_SUITE("lstm-core") {
  TEST_CASE("init is deterministic with the documented shapes") {
    const auto a = init_model(7);
    const auto b = init_model(7);
    CHECK(a == b);
    CHECK(a.input_weights(Gate::Input).size() == 14 * 32);
    CHECK(a.recurrent_weights(Gate::Input).size() == 32 * 32);
    for (double v : a.bias(Gate::Forget)) CHECK(v == 1.0);
    for (double v : a.bias(Gate::Input)) CHECK(v == 0.0);
    CHECK(a.size() == LstmParams::parameter_count(14, 32));
  }

  TEST_CASE("zero parameters give probability one half") {
    LstmParams p(14, 8);
    p.set_zero();
    std::mt19937_64 rng(1);
    const auto w = testing::random_window(rng, 3);
    CHECK(predict_proba(p, w.values) == 0.5);
  }

  TEST_CASE("seed-7 reference probability") {
    const auto p = init_model(7);
    std::vector<double> window(3 * kNumFeatures);
    for (std::size_t i = 0; i < window.size(); ++i) window[i] = double(i % 7) / 7.0;
    CHECK(predict_proba(p, window) == doctest::Approx(0.54307406038608064).epsilon(1e-12));
  }

  TEST_CASE("batched forward equals single forwards, parallel equals serial") {
    const auto p = init_model(3);
    const auto windows = random_batch(4, 33, 3);
    const auto batched = predict_proba(p, windows);
    const auto serial = predict_proba_serial(p, windows);
    for (std::size_t i = 0; i < windows.size(); ++i) {
      CHECK(batched[i] == predict_proba(p, windows[i].values));
      CHECK(serial[i] == batched[i]);
      CHECK(batched[i] > 0.0);
      CHECK(batched[i] < 1.0);
    }
  }

  TEST_CASE("non-finite input is rejected") {
    const auto p = init_model(1);
    std::vector<double> w(3 * kNumFeatures, 0.1);
    w[5] = std::nan("");
    CHECK_THROWS_AS(predict_proba(p, w), InvalidArgument);
  }

  TEST_CASE("bce closed forms") {
    const std::vector<double> half{0.5};
    const std::vector<int> one{1};
    CHECK(bce_loss(half, one) == doctest::Approx(0.693147).epsilon(1e-6));
    const std::vector<double> p{0.9, 0.1};
    const std::vector<int> y{1, 0};
    CHECK(bce_loss(p, y) == doctest::Approx(0.105361).epsilon(1e-6));
    const std::vector<double> exact{1.0, 0.0};
    CHECK(bce_loss(exact, y) < 1e-11);
  }

  TEST_CASE("bptt matches central finite differences") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto params = init_model(seed, kNumFeatures, 4);
      // Non-zero biases so every bias gradient is exercised.
      std::mt19937_64 rng(seed + 100);
      std::normal_distribution<double> n(0.0, 0.3);
      for (double& v : params.values()) v += n(rng);
      const auto windows = random_batch(seed + 200, 6, 3);
      const auto idx = all_indices(windows.size());
      const auto analytic = loss_and_gradient_serial(params, windows, idx, 1.7);

      const double h = 1e-5;
      double worst = 0.0;
      for (std::size_t k = 0; k < params.size(); ++k) {
        auto plus = params;
        auto minus = params;
        plus.values()[k] += h;
        minus.values()[k] -= h;
        const double fd = (loss_and_gradient_serial(plus, windows, idx, 1.7).loss -
                           loss_and_gradient_serial(minus, windows, idx, 1.7).loss) /
                          (2 * h);
        const double g = analytic.gradient.values()[k];
        worst = std::max(worst, std::abs(g - fd) / (std::abs(g) + 1e-8));
      }
      CAPTURE(seed);
      CHECK(worst < 1e-4);
    }
  }

  TEST_CASE("parallel gradient equals serial gradient") {
    const auto params = init_model(9, kNumFeatures, 8);
    const auto windows = random_batch(10, 300, 3);
    const auto idx = all_indices(windows.size());
    const auto a = loss_and_gradient(params, windows, idx);
    const auto b = loss_and_gradient_serial(params, windows, idx);
    CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-12));
    for (std::size_t k = 0; k < a.gradient.size(); ++k) {
      CHECK(a.gradient.values()[k] == doctest::Approx(b.gradient.values()[k]).epsilon(1e-9));
    }
  }

  TEST_CASE("saturated perfect fit has a vanishing gradient") {
    auto params = init_model(2, kNumFeatures, 4);
    params.head_bias() = 40.0;
    for (double& w : params.head_weights()) w = 0.0;
    auto windows = random_batch(3, 8, 3);
    for (auto& w : windows) w.label = 1;
    const auto g = loss_and_gradient_serial(params, windows, all_indices(windows.size()));
    double norm = 0.0;
    for (double v : g.gradient.values()) norm += v * v;
    CHECK(std::sqrt(norm) < 1e-6);
  }

  TEST_CASE("duplicating the batch keeps the mean gradient") {
    const auto params = init_model(4, kNumFeatures, 4);
    auto windows = random_batch(5, 5, 3);
    const auto single = loss_and_gradient_serial(params, windows, all_indices(5));
    const auto copy = windows;
    windows.insert(windows.end(), copy.begin(), copy.end());
    const auto twice = loss_and_gradient_serial(params, windows, all_indices(10));
    CHECK(twice.loss == doctest::Approx(single.loss).epsilon(1e-12));
    for (std::size_t k = 0; k < params.size(); ++k) {
      CHECK(twice.gradient.values()[k] ==
            doctest::Approx(single.gradient.values()[k]).epsilon(1e-10));
    }
  }

  TEST_CASE("fit separates two clusters and stops early as configured") {
    std::mt19937_64 rng(0);
    std::normal_distribution<double> noise(0.0, 0.05);
    auto cluster = [&](std::size_t n, double centre, int label) {
      std::vector<Window> out;
      for (std::size_t i = 0; i < n; ++i) {
        Window w;
        w.steps = 3;
        w.label = label;
        for (std::size_t k = 0; k < 3 * kNumFeatures; ++k) {
          w.values.push_back(std::clamp(centre + noise(rng), 0.0, 1.0));
        }
        out.push_back(std::move(w));
      }
      return out;
    };
    auto train = cluster(200, 0.25, 0);
    for (auto& w : cluster(200, 0.75, 1)) train.push_back(w);
    auto val = cluster(40, 0.25, 0);
    for (auto& w : cluster(40, 0.75, 1)) val.push_back(w);

    TrainConfig cfg;
    cfg.hidden = 8;
    cfg.max_epochs = 30;
    cfg.adam.learning_rate = 0.01;
    const auto fitted = fit(init_model(0, kNumFeatures, 8), train, val, cfg);
    CHECK(fitted.best_validation_loss < 0.1);
    CHECK(fitted.history.size() <= 30);
    double best = 1e300;
    for (const auto& e : fitted.history) best = std::min(best, e.validation_loss);
    CHECK(fitted.best_validation_loss == best);

    const auto again = fit(init_model(0, kNumFeatures, 8), train, val, cfg);
    REQUIRE(again.history.size() == fitted.history.size());
    for (std::size_t i = 0; i < again.history.size(); ++i) {
      CHECK(again.history[i].train_loss == fitted.history[i].train_loss);
    }

    cfg.patience = 0;
    CHECK(fit(init_model(0, kNumFeatures, 8), train, val, cfg).history.size() == 1);
  }

  TEST_CASE("model file round trip and corruption") {
    DetectorModel m;
    m.params = init_model(7);
    m.scaler = Scaler{};
    m.scaler->max.fill(2.0);
    m.threshold = 0.4;
    const auto bytes = serialize_model(m);
    CHECK(deserialize_model(bytes) == m);

    const auto dir = testing::scratch_dir("lstm-model");
    save_model(m, dir / "m.bin");
    CHECK(load_model(dir / "m.bin") == m);

    std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + std::ptrdiff_t(bytes.size() / 2));
    CHECK_THROWS_AS(deserialize_model(truncated), ParseError);

    auto old = bytes;
    old[8] = old[9] = old[10] = old[11] = 0;
    try {
      deserialize_model(old);
      FAIL("expected a version error");
    } catch (const ModelVersionError& e) {
      CHECK(e.found() == 0);
    }
  }
}
