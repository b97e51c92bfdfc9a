#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "sentinel/lime.hpp"

using namespace sentinel;

namespace {

std::vector<Window> uniform_training(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Window> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(testing::random_window(rng, 3));
  return out;
}

BatchModel constant_model(double c) {
  return [c](std::span<const double>, std::size_t, std::span<double> out) {
    for (double& v : out) v = c;
  };
}

/// sigmoid(8 (x_cell - 0.5))
BatchModel single_cell_model(std::size_t cell) {
  return [cell](std::span<const double> rows, std::size_t len, std::span<double> out) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = 1.0 / (1.0 + std::exp(-8.0 * (rows[i * len + cell] - 0.5)));
    }
  };
}

}  // namespace

TEST_SUITE("xai-lime") {
  TEST_CASE("quartile edges of a uniform grid") {
    std::vector<Window> grid;
    for (int i = 0; i <= 4; ++i) {
      Window w;
      w.steps = 3;
      w.values.assign(3 * kNumFeatures, i / 4.0);
      grid.push_back(w);
    }
    const auto d = fit_discretizer(grid);
    REQUIRE(d.cells.size() == 42);
    CHECK(d.cells[0].edges == std::vector<double>{0.25, 0.5, 0.75});
    CHECK(d.bin_count(0) == 4);
    CHECK(d.bin_of(0, 0.1) == 0);
    CHECK(d.bin_of(0, 0.25) == 0);
    CHECK(d.bin_of(0, 0.3) == 1);
    CHECK(d.bin_of(0, 0.9) == 3);
  }

  TEST_CASE("rule rendering") {
    std::vector<Window> train = uniform_training(200, 1);
    for (auto& w : train) w.values[5] = 0.4;  // ul_bitrate in the oldest row
    const auto d = fit_discretizer(train);
    CHECK(d.cells[5].constant);
    CHECK(d.rule(5, 0) == "ul_bitrate_t-2 = 0.40");

    QuartileDiscretizer manual;
    manual.steps = 3;
    manual.cells.resize(42);
    const std::size_t last_ul_bitrate = 2 * kNumFeatures + *feature_index("ul_bitrate");
    manual.cells[last_ul_bitrate].edges = {0.02, 0.09, 0.22};
    CHECK(manual.rule(last_ul_bitrate, 3) == "ul_bitrate_t-0 > 0.22");
    CHECK(manual.rule(last_ul_bitrate, 0) == "ul_bitrate_t-0 ≤ 0.02");
    CHECK(manual.rule(last_ul_bitrate, 1) == "0.02 < ul_bitrate_t-0 ≤ 0.09");
    CHECK(cell_name(3, 0) == "epre_t-2");
  }

  TEST_CASE("discretizer json round trip") {
    const auto d = fit_discretizer(uniform_training(100, 2));
    const auto back = discretizer_from_json(to_json(d));
    CHECK(back.steps == d.steps);
    CHECK(back.cells[7].edges == d.cells[7].edges);
    CHECK(back.cells[7].freq == d.cells[7].freq);
    auto bad = to_json(d);
    bad["cells"].erase(0);
    CHECK_THROWS_AS(discretizer_from_json(bad), ParseError);
  }

  TEST_CASE("constant model has zero contributions") {
    const auto d = fit_discretizer(uniform_training(300, 3));
    std::mt19937_64 rng(4);
    const auto x = testing::random_window(rng, 3);
    LimeConfig cfg;
    cfg.seed = 5;
    const auto ex = explain_lime(constant_model(0.7), x.values, d, cfg);
    REQUIRE(ex.terms.size() == 42);
    for (const auto& t : ex.terms) CHECK(std::abs(t.phi) < 1e-6);
    CHECK(ex.intercept == doctest::Approx(0.7).epsilon(1e-9));
  }

  TEST_CASE("single-feature model ranks its cell first") {
    const auto d = fit_discretizer(uniform_training(500, 6));
    const std::size_t cell = 2 * kNumFeatures + *feature_index("ul_bitrate");
    int first = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      std::mt19937_64 rng(1000 + seed);
      const auto x = testing::random_window(rng, 3);
      LimeConfig cfg;
      cfg.seed = seed;
      const auto ex = explain_lime(single_cell_model(cell), x.values, d, cfg);
      if (ex.terms.front().cell == cell) ++first;
    }
    CHECK(first >= 95);
  }

  TEST_CASE("zero-information cell gets no weight, determinism, surrogate at the instance") {
    auto train = uniform_training(400, 7);
    for (auto& w : train) w.values[3] = 0.6;
    const auto d = fit_discretizer(train);
    std::mt19937_64 rng(8);
    auto x = testing::random_window(rng, 3);
    x.values[3] = 0.6;
    LimeConfig cfg;
    cfg.seed = 9;
    const auto model = single_cell_model(40);
    const auto a = explain_lime(model, x.values, d, cfg);
    const auto b = explain_lime(model, x.values, d, cfg);
    for (std::size_t i = 0; i < a.terms.size(); ++i) {
      CHECK(a.terms[i].phi == b.terms[i].phi);
      CHECK(a.terms[i].rule == b.terms[i].rule);
      if (a.terms[i].cell == 3) CHECK(std::abs(a.terms[i].phi) < 1e-3);
    }
    double sum = a.intercept;
    for (const auto& t : a.terms) sum += t.phi;
    CHECK(sum == doctest::Approx(a.local_prediction).epsilon(1e-9));
  }

  TEST_CASE("top-k cap and argument checks") {
    const auto d = fit_discretizer(uniform_training(200, 10));
    std::mt19937_64 rng(11);
    const auto x = testing::random_window(rng, 3);
    LimeConfig cfg;
    cfg.max_features = 5;
    CHECK(explain_lime(single_cell_model(0), x.values, d, cfg).terms.size() == 5);
    cfg.n_samples = 10;
    CHECK_THROWS_AS(explain_lime(single_cell_model(0), x.values, d, cfg), InvalidArgument);
    CHECK_THROWS_AS(explain_lime(single_cell_model(0), std::vector<double>(5, 0.0), d, LimeConfig{}),
                    InvalidArgument);
  }

  TEST_CASE("table has three pairs per row") {
    std::vector<LimeTerm> terms{{0, "a", 0.1}, {1, "b", -0.2}, {2, "c", 0.3}, {3, "d", 0.04}};
    const auto table = render_lime_table(terms);
    CHECK(table.find("| a | 0.10000 | b | -0.20000 | c | 0.30000 |\n") != std::string::npos);
    CHECK(table.find("| d | 0.04000 |  |  |  |  |\n") != std::string::npos);
  }
}
