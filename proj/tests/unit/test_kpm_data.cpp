#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "helpers.hpp"
#include "sentinel/config.hpp"
#include "sentinel/kpm_data.hpp"

using namespace sentinel;
using testing::record;

namespace {

std::string csv_header() {
  std::string h = "timestamp,ue_id";
  for (auto f : kFeatureNames) h += "," + std::string(f);
  return h + ",label\n";
}

std::string csv_row(std::int64_t ts, const std::string& ue, const std::string& last = "0.5",
                    int label = 0) {
  std::string row = std::to_string(ts) + "," + ue;
  for (std::size_t f = 0; f + 1 < kNumFeatures; ++f) row += ",0.5";
  return row + "," + last + "," + std::to_string(label) + "\n";
}

}  // namespace

TEST_SUITE("kpm-data") {
  TEST_CASE("well-formed csv loads sorted by ue and timestamp") {
    const auto text = csv_header() + csv_row(10, "ue-b") + csv_row(15, "ue-a") + csv_row(5, "ue-a");
    const auto result = parse_kpm_csv(text);
    REQUIRE(result.records.size() == 3);
    CHECK(result.dropped_rows == 0);
    CHECK(result.records[0].ue_id == "ue-a");
    CHECK(result.records[0].timestamp == 5);
    CHECK(result.records[1].timestamp == 15);
    CHECK(result.records[2].ue_id == "ue-b");
  }

  TEST_CASE("row with a NaN cell is dropped and counted") {
    const auto text = csv_header() + csv_row(5, "ue") + csv_row(10, "ue", "nan") + csv_row(15, "ue");
    const auto result = parse_kpm_csv(text);
    CHECK(result.records.size() == 2);
    CHECK(result.dropped_rows == 1);
  }

  TEST_CASE("missing column is a schema error naming it") {
    auto header = csv_header();
    header.replace(header.find(",cqi"), 4, "");
    try {
      parse_kpm_csv(header);
      FAIL("expected a schema error");
    } catch (const SchemaError& e) {
      CHECK(e.column() == "cqi");
    }
  }

  TEST_CASE("csv round trip") {
    std::vector<KpmRecord> records{record("a", 5, 0.25, 0, 1), record("a", 10, 0.75, 1, 2)};
    const auto back = parse_kpm_csv(format_kpm_csv(records)).records;
    REQUIRE(back.size() == 2);
    CHECK(back[1].features == records[1].features);
    CHECK(back[1].label == 1);
    CHECK(back[1].day == 2);
  }

  TEST_CASE("class stats of identical records have zero std") {
    std::vector<KpmRecord> records{record("a", 0, 0.3, 0), record("a", 5, 0.3, 0),
                                   record("b", 0, 0.9, 1), record("b", 5, 0.9, 1)};
    const auto s = compute_class_stats(records);
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      CHECK(s.normal.std[f] == 0.0);
      CHECK(s.attack.std[f] == 0.0);
      CHECK(s.normal.mean[f] == doctest::Approx(0.3));
      CHECK(s.attack.mean[f] == doctest::Approx(0.9));
    }
  }

  TEST_CASE("percent difference of class means") {
    FeatureStats s;
    const auto f = *feature_index("ul_err");
    s.normal.mean[f] = 0.10;
    s.attack.mean[f] = 0.10 * (1.0 + 29.0613);
    CHECK(s.percent_difference()[f] == doctest::Approx(2906.13));
    const auto g = *feature_index("dl_bitrate");
    s.normal.mean[g] = 1.16;
    s.attack.mean[g] = 0.05;
    CHECK(s.percent_difference()[g] < 0.0);
    CHECK(std::isnan(s.percent_difference()[0]));
  }

  TEST_CASE("bundled normalized stats round trip through yaml") {
    const auto stats = load_stats_yaml(testing::data_dir() / "kpm_stats.yaml");
    const auto epre = *feature_index("epre");
    CHECK(stats.normal.mean[epre] == doctest::Approx(0.5695));
    CHECK(stats.normal.std[epre] == doctest::Approx(0.2032));
    const auto back = parse_stats_yaml(format_stats_yaml(stats));
    CHECK(back.normal.mean == stats.normal.mean);
    CHECK(back.attack.std == stats.attack.std);
  }

  TEST_CASE("min-max scaling") {
    std::vector<KpmRecord> train{record("a", 0, 2.0), record("a", 5, 4.0), record("a", 10, 6.0)};
    const auto scaler = fit_scaler(train);
    const auto scaled = apply_scaler(scaler, train);
    CHECK(scaled[0].features[0] == 0.0);
    CHECK(scaled[1].features[0] == 0.5);
    CHECK(scaled[2].features[0] == 1.0);
    CHECK(scaler.transform(0, 8.0) == 1.0);
    CHECK(scaler.transform(0, -1.0) == 0.0);

    std::vector<KpmRecord> constant{record("a", 0, 5.0), record("a", 5, 5.0)};
    const auto c = apply_scaler(fit_scaler(constant), constant);
    CHECK(c[0].features[3] == 0.0);
    CHECK(c[1].features[3] == 0.0);

    const auto refit = fit_scaler(scaled);
    CHECK(refit.min[0] == 0.0);
    CHECK(refit.max[0] == 1.0);
  }

  TEST_CASE("window counts and labels") {
    std::vector<KpmRecord> five;
    for (int i = 0; i < 5; ++i) five.push_back(record("a", 5 * i, 0.1, i == 4 ? 1 : 0));
    const auto w = make_windows(five, 3);
    REQUIRE(w.size() == 3);
    CHECK(w[0].label == 0);
    CHECK(w[2].label == 1);  // labels (0,0,1)
    CHECK(w[0].values.size() == 3 * kNumFeatures);

    // 10 samples with a 30 s gap after sample 4: runs of 4 and 6.
    std::vector<KpmRecord> gapped;
    for (int i = 0; i < 10; ++i) gapped.push_back(record("a", i < 4 ? 5 * i : 5 * i + 30, 0.1));
    CHECK(make_windows(gapped, 3).size() == 2 + 4);

    // Windows never span two UEs.
    std::vector<KpmRecord> two{record("a", 0, 0), record("a", 5, 0), record("b", 10, 0),
                               record("b", 15, 0)};
    CHECK(make_windows(two, 3).empty());
  }

  TEST_CASE("stratified split") {
    std::vector<Window> windows(100);
    for (std::size_t i = 0; i < windows.size(); ++i) {
      windows[i].steps = 1;
      windows[i].values.assign(kNumFeatures, double(i));
    }
    const auto split = split_train_test(windows, 0.8, 3);
    CHECK(split.train.size() == 80);
    CHECK(split.test.size() == 20);
    const auto again = split_train_test(windows, 0.8, 3);
    for (std::size_t i = 0; i < split.test.size(); ++i) {
      CHECK(split.test[i].values == again.test[i].values);
    }

    // 1.7% positives: both sides keep the base rate within half a point.
    std::vector<Window> rare(10000);
    for (std::size_t i = 0; i < rare.size(); ++i) {
      rare[i].steps = 1;
      rare[i].values.assign(kNumFeatures, 0.0);
      rare[i].label = i < 170 ? 1 : 0;
    }
    const auto s = split_train_test(rare, 0.8, 11);
    auto rate = [](const std::vector<Window>& ws) {
      return 100.0 * double(std::count_if(ws.begin(), ws.end(), [](const Window& w) { return w.label == 1; })) /
             double(ws.size());
    };
    CHECK(std::abs(rate(s.train) - 1.7) <= 0.5);
    CHECK(std::abs(rate(s.test) - 1.7) <= 0.5);
  }

  TEST_CASE("replay trainset sizes") {
    auto make = [](std::size_t n, double tag) {
      std::vector<Window> ws(n);
      for (auto& w : ws) {
        w.steps = 1;
        w.values.assign(kNumFeatures, tag);
      }
      return ws;
    };
    const auto day = make(100, 1.0);
    const auto pool = make(500, 0.0);
    const auto r = build_replay_trainset(day, pool, 0.3, 1);
    CHECK(r.windows.size() == 130);
    CHECK(r.replayed == 30);
    CHECK_FALSE(r.truncated);
    CHECK(build_replay_trainset(day, pool, 0.0, 1).windows.size() == 100);
    const auto small = build_replay_trainset(day, make(20, 0.0), 0.5, 1);
    CHECK(small.windows.size() == 120);
    CHECK(small.truncated);
  }

  TEST_CASE("synthetic generator") {
    SynthConfig cfg;
    cfg.stats = load_stats_yaml(testing::data_dir() / "kpm_stats.yaml");
    cfg.ues = 10;
    cfg.samples_per_ue = 100;
    cfg.correlation = 0.0;
    cfg.seed = 5;
    const auto records = synthesize_dataset(cfg);
    REQUIRE(records.size() == 1000);

    const auto f = *feature_index("dl_bitrate");
    double mean = 0.0;
    for (const auto& r : records) {
      CHECK(r.label == 0);
      mean += r.features[f] / double(records.size());
    }
    CHECK(std::abs(mean - 0.0162) <= 3.0 * 0.0220 / std::sqrt(1000.0));
    for (const auto& r : records) {
      for (double v : r.features) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }

    const auto again = synthesize_dataset(cfg);
    CHECK(std::equal(records.begin(), records.end(), again.begin(), [](const auto& a, const auto& b) {
      return a.features == b.features && a.timestamp == b.timestamp && a.ue_id == b.ue_id;
    }));

    cfg.schedule.push_back({1, 0, 0, 100, 1, ""});
    cfg.ues = 1;
    for (const auto& r : synthesize_dataset(cfg)) CHECK(r.label == 1);
  }

  TEST_CASE("clipped gaussian calibration hits the target moments") {
    const auto latent = calibrate_clipped_gaussian(0.0162, 0.0220);
    const auto [m, s] = clipped_gaussian_moments(latent.mean, latent.std);
    CHECK(m == doctest::Approx(0.0162).epsilon(1e-4));
    CHECK(s == doctest::Approx(0.0220).epsilon(1e-4));
  }
}
