#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>

#include <fmt/format.h>

#include "helpers.hpp"
#include "sentinel/report.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run sentinel_cli(const std::string& args) {
  static int counter = 0;
  const auto dir = testing::scratch_dir("cli-io");
  const auto out = dir / fmt::format("{}.out", counter);
  const auto err = dir / fmt::format("{}.err", counter++);
  const auto cmd = fmt::format("'{}' {} >'{}' 2>'{}'", SENTINEL_BIN, args, out.string(), err.string());
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = testing::read_text(out);
  r.err = testing::read_text(err);
  return r;
}

const std::string kScenario = R"(days: 1
ues: 4
samples_per_ue: 160
correlation: 0.8
seed: 11
schedule:
  - {day: 1, ues: [1, 3], start: 50, end: 100}
)";

const std::string kBenignScenario = R"(days: 1
ues: 4
samples_per_ue: 160
correlation: 0.8
seed: 12
)";

/// Synthesizes a small corpus and trains a model on it once per process.
const fs::path& workdir() {
  static const fs::path dir = [] {
    const auto d = testing::scratch_dir("cli");
    testing::write_text(d / "scenario.yaml", kScenario);
    testing::write_text(d / "benign.yaml", kBenignScenario);
    const auto stats = (testing::data_dir() / "kpm_stats.yaml").string();
    REQUIRE(sentinel_cli(fmt::format("synth --stats '{}' --scenario '{}' --out '{}'", stats,
                                     (d / "scenario.yaml").string(), (d / "kpm.csv").string()))
                .code == 0);
    REQUIRE(sentinel_cli(fmt::format("synth --stats '{}' --scenario '{}' --out '{}'", stats,
                                     (d / "benign.yaml").string(), (d / "benign.csv").string()))
                .code == 0);
    REQUIRE(sentinel_cli(fmt::format("train --input '{}' --model '{}' --hidden 8 --max-epochs 8 "
                                     "--global-samples 4",
                                     (d / "kpm.csv").string(), (d / "model.bin").string()))
                .code == 0);
    REQUIRE(sentinel_cli(fmt::format("detect --model '{}' --input '{}' --out '{}'",
                                     (d / "model.bin").string(), (d / "kpm.csv").string(),
                                     (d / "det.jsonl").string()))
                .code == 0);
    testing::write_text(d / "response.md", "Uplink flooding from one UE. Rate-limit it.\n");
    return d;
  }();
  return dir;
}

std::string explain_args(const fs::path& d, const std::string& extra) {
  return fmt::format("explain --model '{}' --detections '{}' --window-id 60 --lime-samples 400 "
                     "--shap-coalitions 128 {}",
                     (d / "model.bin").string(), (d / "det.jsonl").string(), extra);
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("help exits cleanly") {
    const auto r = sentinel_cli("--help");
    CHECK(r.code == 0);
    CHECK(r.out.find("explain") != std::string::npos);
  }

  TEST_CASE("corrupted model is rejected") {
    const auto& d = workdir();
    testing::write_text(d / "broken.bin", "not a model at all");
    const auto r = sentinel_cli(fmt::format("detect --model '{}' --input '{}' --out '{}'",
                                            (d / "broken.bin").string(), (d / "kpm.csv").string(),
                                            (d / "broken.jsonl").string()));
    CHECK(r.code == 2);
    CHECK(r.err.find("model parse error") != std::string::npos);
  }

  TEST_CASE("header-only CSV gives no detections and a warning") {
    const auto& d = workdir();
    const auto csv = testing::read_text(d / "kpm.csv");
    testing::write_text(d / "empty.csv", csv.substr(0, csv.find('\n') + 1));
    const auto r = sentinel_cli(fmt::format("detect --model '{}' --input '{}' --out '{}'",
                                            (d / "model.bin").string(), (d / "empty.csv").string(),
                                            (d / "empty.jsonl").string()));
    CHECK(r.code == 0);
    CHECK(r.err.find("warning") != std::string::npos);
    CHECK(testing::read_text(d / "empty.jsonl").empty());
  }

  TEST_CASE("benign-only corpus is mostly labeled benign") {
    const auto& d = workdir();
    REQUIRE(sentinel_cli(fmt::format("detect --model '{}' --input '{}' --out '{}'",
                                     (d / "model.bin").string(), (d / "benign.csv").string(),
                                     (d / "benign.jsonl").string()))
                .code == 0);
    std::size_t total = 0, benign = 0;
    std::istringstream in(testing::read_text(d / "benign.jsonl"));
    for (std::string line; std::getline(in, line);) {
      ++total;
      benign += nlohmann::json::parse(line)["label"] == 0;
    }
    REQUIRE(total > 0);
    CHECK(double(benign) / double(total) >= 0.95);
  }

  TEST_CASE("few-shot without exemplars is a config error") {
    const auto& d = workdir();
    const auto r = sentinel_cli(explain_args(
        d, fmt::format("--mode few --provider mock --mock-response '{}' --out '{}'",
                       (d / "response.md").string(), (d / "few.json").string())));
    CHECK(r.code == 2);
    CHECK(r.err.find("exemplars") != std::string::npos);
  }

  TEST_CASE("unknown experiment key is named") {
    const auto& d = workdir();
    testing::write_text(d / "bad.yaml", "stats: a.yaml\nscenario: b.yaml\ntrain:\n  hiden: 4\n");
    const auto r = sentinel_cli(fmt::format("experiment --config '{}'", (d / "bad.yaml").string()));
    CHECK(r.code == 2);
    CHECK(r.err.find("train.hiden") != std::string::npos);
  }

  TEST_CASE("replayed explanation is byte-stable apart from timings") {
    const auto& d = workdir();
    const auto session = d / "session.json";
    fs::remove(session);
    REQUIRE(sentinel_cli(explain_args(d, fmt::format("--provider mock --mock-response '{}' "
                                                     "--record '{}' --out '{}'",
                                                     (d / "response.md").string(), session.string(),
                                                     (d / "live.json").string())))
                .code == 0);
    for (const char* name : {"replay1.json", "replay2.json"}) {
      REQUIRE(sentinel_cli(explain_args(d, fmt::format("--provider mock --offline --replay '{}' "
                                                       "--out '{}'",
                                                       session.string(), (d / name).string())))
                  .code == 0);
    }
    auto a = sentinel::load_json_file(d / "replay1.json");
    auto b = sentinel::load_json_file(d / "replay2.json");
    auto live = sentinel::load_json_file(d / "live.json");
    for (auto* j : {&a, &b, &live}) {
      j->erase("timing_ms");
      (*j)["insight"].erase("latency_ms");
    }
    CHECK(a.dump() == b.dump());
    CHECK(a.dump() == live.dump());

    const auto rendered = sentinel_cli(fmt::format("report --in '{}'", (d / "replay1.json").string()));
    CHECK(rendered.code == 0);
    CHECK(rendered.out.find("Rate-limit it.") != std::string::npos);
  }

  TEST_CASE("offline explain with an empty session fails cleanly") {
    const auto& d = workdir();
    testing::write_text(d / "empty-session.json", R"({"version":1,"entries":{}})");
    const auto r = sentinel_cli(explain_args(
        d, fmt::format("--provider mock --offline --replay '{}' --out '{}'",
                       (d / "empty-session.json").string(), (d / "miss.json").string())));
    CHECK(r.code != 0);
    CHECK(r.err.find("error") != std::string::npos);
  }
}
