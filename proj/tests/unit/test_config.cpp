#include <doctest.h>

#include "helpers.hpp"
#include "sentinel/config.hpp"

using namespace sentinel;

namespace {

std::string config_error_key(const std::string& yaml) {
  try {
    parse_experiment_yaml(yaml, "/tmp");
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<none>";
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("bundled experiment config loads with resolved paths") {
    const auto file = load_experiment_yaml(testing::data_dir() / "experiment.yaml");
    CHECK(file.experiment.windows == std::vector<std::size_t>{3});
    CHECK(file.experiment.ratios == std::vector<double>{0.0, 0.3});
    CHECK(file.experiment.seeds.size() == 5);
    CHECK(std::filesystem::exists(file.stats));
    CHECK(std::filesystem::exists(file.scenario));
  }

  TEST_CASE("effective config re-parses to the same experiment") {
    const auto file = load_experiment_yaml(testing::data_dir() / "experiment.yaml");
    const auto text = format_experiment_yaml(file);
    const auto back = parse_experiment_yaml(text);
    CHECK(format_experiment_yaml(back) == text);
    CHECK(back.experiment.train.adam.learning_rate == file.experiment.train.adam.learning_rate);
    CHECK(back.stats == std::filesystem::absolute(file.stats).lexically_normal());
  }

  TEST_CASE("invalid keys are named") {
    CHECK(config_error_key("stats: a.yaml\nscenario: b.yaml\nwindowz: [3]\n") == "windowz");
    CHECK(config_error_key("stats: a.yaml\nscenario: b.yaml\ntrain: {hiden: 4}\n") == "train.hiden");
    CHECK(config_error_key("stats: a.yaml\nscenario: b.yaml\nratios: [1.5]\n") == "ratios");
    CHECK(config_error_key("stats: a.yaml\nscenario: b.yaml\nwindows: [three]\n") == "windows");
    CHECK(config_error_key("windows: [3]\n") == "corpus");
    CHECK(config_error_key("stats: a.yaml\nscenario: b.yaml\ntrain: {learning_rate: 0}\n") ==
          "train.learning_rate");
  }

  TEST_CASE("scenario file") {
    const auto cfg = load_synth_config(testing::data_dir() / "kpm_stats.yaml",
                                       testing::data_dir() / "scenario-4day.yaml");
    CHECK(cfg.days == 4);
    CHECK(cfg.profiles.count("syn_flood") == 1);
    CHECK_FALSE(cfg.schedule.empty());
    CHECK_THROWS_AS(parse_scenario_yaml("days: 2\nfoo: 1\n"), ConfigError);
  }

  TEST_CASE("stats file requires every feature") {
    CHECK_THROWS_AS(parse_stats_yaml("epre: [0.5, 0.1, 0.4, 0.1]\n"), ConfigError);
  }
}
