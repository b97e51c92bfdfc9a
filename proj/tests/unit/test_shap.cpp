#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "sentinel/shap.hpp"

using namespace sentinel;

namespace {

/// out = f(row) for a scalar function of one input row.
template <typename F>
BatchModel rowwise(F f) {
  return [f](std::span<const double> rows, std::size_t len, std::span<double> out) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(rows.subspan(i * len, len));
  };
}

/// Random one-hidden-layer tanh network with a sigmoid output.
BatchModel tiny_net(std::uint64_t seed, std::size_t inputs, std::size_t hidden = 6) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> w1(inputs * hidden), b1(hidden), w2(hidden);
  for (auto& v : w1) v = n(rng);
  for (auto& v : b1) v = n(rng);
  for (auto& v : w2) v = n(rng);
  return rowwise([=](std::span<const double> x) {
    double z = 0.0;
    for (std::size_t h = 0; h < hidden; ++h) {
      double a = b1[h];
      for (std::size_t i = 0; i < inputs; ++i) a += w1[h * inputs + i] * x[i];
      z += w2[h] * std::tanh(a);
    }
    return 1.0 / (1.0 + std::exp(-z));
  });
}

Background zeros(std::size_t m) { return Background{{std::vector<double>(m, 0.0)}}; }

}  // namespace

TEST_SUITE("xai-shap") {
  TEST_CASE("kernel weights") {
    CHECK(shapley_kernel_weight(4, 1) == doctest::Approx(0.25));
    CHECK(shapley_kernel_weight(4, 2) == doctest::Approx(0.125));
    for (std::size_t s = 1; s < 10; ++s) {
      CHECK(shapley_kernel_weight(10, s) == doctest::Approx(shapley_kernel_weight(10, 10 - s)));
    }
  }

  TEST_CASE("exact shapley of a linear model") {
    const auto f = rowwise([](std::span<const double> x) { return 2 * x[0] + 3 * x[1]; });
    const std::vector<double> x{1.0, 1.0};
    const auto ex = exact_shapley(f, x, zeros(2), 2);
    CHECK(ex.phi[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(ex.phi[1] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(ex.base_value == 0.0);
  }

  TEST_CASE("shapley axioms on small constructed games") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::size_t m = 2; m <= 4; ++m) {
      CAPTURE(m);
      std::vector<double> x(m), bg(m);
      for (std::size_t i = 0; i < m; ++i) {
        x[i] = u(rng);
        bg[i] = u(rng);
      }
      x[1] = x[0];
      bg[1] = bg[0];
      // Symmetric in players 0 and 1, ignores the last player when m > 2.
      const std::size_t used = m > 2 ? m - 1 : m;
      const auto f = rowwise([used](std::span<const double> v) {
        double s = v[0] * v[1] + std::sin(v[0] + v[1]);
        for (std::size_t i = 2; i < used; ++i) s += v[i] * v[0] * v[1];
        return s;
      });
      const Background b{{bg}};
      const auto ex = exact_shapley(f, x, b, m);
      CHECK(std::abs(ex.phi[0] - ex.phi[1]) <= 1e-9);
      if (m > 2) CHECK(std::abs(ex.phi[m - 1]) <= 1e-9);
      CHECK(ex.local_accuracy_gap() <= 1e-9);
    }
  }

  TEST_CASE("linearity of exact shapley") {
    const auto f = tiny_net(3, 4);
    const auto g = tiny_net(4, 4);
    const auto sum = [&](std::span<const double> rows, std::size_t len, std::span<double> out) {
      std::vector<double> a(out.size()), b(out.size());
      f(rows, len, a);
      g(rows, len, b);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    };
    const std::vector<double> x{0.2, 0.9, 0.4, 0.7};
    const auto ef = exact_shapley(f, x, zeros(4), 4);
    const auto eg = exact_shapley(g, x, zeros(4), 4);
    const auto es = exact_shapley(sum, x, zeros(4), 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(es.phi[i] - ef.phi[i] - eg.phi[i]) <= 1e-12);
  }

  TEST_CASE("kernel shap agrees with exact enumeration on ten players") {
    double worst_full = 0.0;
    double worst_sampled = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto model = tiny_net(seed, 10);
      std::mt19937_64 rng(seed + 50);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::vector<double> x(10), bg(10);
      for (std::size_t i = 0; i < 10; ++i) {
        x[i] = u(rng);
        bg[i] = u(rng);
      }
      const Background b{{bg}};
      const auto exact = exact_shapley(model, x, b, 5);
      ShapConfig full;
      full.full_enumeration = true;
      ShapConfig sampled;
      sampled.seed = seed;
      const auto kf = explain_kernel_shap(model, x, b, full, 5);
      const auto ks = explain_kernel_shap(model, x, b, sampled, 5);
      CHECK(kf.local_accuracy_gap() <= 1e-6);
      CHECK(ks.local_accuracy_gap() <= 1e-6);
      for (std::size_t i = 0; i < 10; ++i) {
        worst_full = std::max(worst_full, std::abs(kf.phi[i] - exact.phi[i]));
        worst_sampled = std::max(worst_sampled, std::abs(ks.phi[i] - exact.phi[i]));
      }
    }
    CHECK(worst_full < 1e-3);
    CHECK(worst_sampled < 0.05);
  }

  TEST_CASE("constant model") {
    const auto f = rowwise([](std::span<const double>) { return 0.3; });
    std::mt19937_64 rng(2);
    const auto w = testing::random_window(rng, 3);
    const auto ex = explain_kernel_shap(f, w.values, zeros(42), ShapConfig{});
    CHECK(ex.base_value == 0.3);
    for (double v : ex.phi) CHECK(std::abs(v) < 1e-12);
    CHECK(ex.steps == 3);
    CHECK(ex.features == 14);
  }

  TEST_CASE("kernel shap on 42 cells keeps local accuracy and is seeded") {
    const auto model = tiny_net(9, 42, 8);
    std::mt19937_64 rng(3);
    const auto x = testing::random_window(rng, 3);
    const auto bg = testing::random_window(rng, 3);
    ShapConfig cfg;
    cfg.seed = 4;
    const auto a = explain_kernel_shap(model, x.values, Background{{bg.values}}, cfg);
    const auto b = explain_kernel_shap(model, x.values, Background{{bg.values}}, cfg);
    CHECK(a.phi == b.phi);
    CHECK(a.local_accuracy_gap() <= 1e-6);
    CHECK_THROWS_AS(explain_kernel_shap(model, std::vector<double>(41, 0.0), Background{{bg.values}}, cfg),
                    InvalidArgument);
  }

  TEST_CASE("global importance is the mean absolute attribution") {
    ShapExplanation e;
    e.steps = 1;
    e.features = 3;
    e.phi = {0.5, -0.25, 0.0};
    const std::vector<ShapExplanation> one{e};
    CHECK(global_importance(one).phi == std::vector<double>{0.5, 0.25, 0.0});
    auto neg = e;
    for (double& v : neg.phi) v = -v;
    const std::vector<ShapExplanation> pair{e, neg};
    const auto g = global_importance(pair);
    CHECK(g.phi == std::vector<double>{0.5, 0.25, 0.0});
    CHECK(g.count == 2);
    const auto back = global_from_json(to_json(g));
    CHECK(back.phi == g.phi);
  }

  TEST_CASE("mean background and table layout") {
    Window a, b;
    a.steps = b.steps = 1;
    a.values.assign(14, 0.0);
    b.values.assign(14, 1.0);
    const std::vector<Window> ws{a, b};
    const auto bg = mean_background(ws);
    REQUIRE(bg.rows.size() == 1);
    CHECK(bg.rows[0][3] == 0.5);
    const auto table = render_timestep_table(1, bg.rows[0]);
    CHECK(table.rfind("| Timestep | epre |", 0) == 0);
    CHECK(table.find("| T0 | 0.50000 |") != std::string::npos);
  }
}
