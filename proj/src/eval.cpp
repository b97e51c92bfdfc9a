#include "sentinel/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

namespace sentinel {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

ConfusionCounts count_confusion(std::span<const int> predictions, std::span<const int> labels) {
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred = predictions[i] == 1;
    const bool truth = labels[i] == 1;
    if (pred && truth) ++c.tp;
    else if (pred) ++c.fp;
    else if (truth) ++c.fn;
    else ++c.tn;
  }
  return c;
}

ConfusionCounts evaluate(const LstmParams& params, std::span<const Window> test,
                         double threshold, bool parallel) {
  const auto probs = parallel ? predict_proba(params, test) : predict_proba_serial(params, test);
  ConfusionCounts c;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const bool pred = probs[i] >= threshold;
    const bool truth = test[i].label == 1;
    if (pred && truth) ++c.tp;
    else if (pred) ++c.fp;
    else if (truth) ++c.fn;
    else ++c.tn;
  }
  return c;
}

std::string csv_number(double v) { return std::isnan(v) ? "NA" : fmt::format("{:.6f}", v); }

nlohmann::json json_number(double v) {
  return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v);
}

double nan_mean(std::span<const double> values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double v : values) {
    if (!std::isnan(v)) {
      sum += v;
      ++n;
    }
  }
  return n == 0 ? kNaN : sum / double(n);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined state.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (a + 1) + 0xBF58476D1CE4E5B9ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Metrics metrics_from_counts(const ConfusionCounts& c) {
  Metrics m;
  m.counts = c;
  m.precision = safe_ratio(double(c.tp), double(c.tp + c.fp));
  m.recall = safe_ratio(double(c.tp), double(c.tp + c.fn));
  m.f1 = safe_ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
  m.fpr_percent = 100.0 * safe_ratio(double(c.fp), double(c.fp + c.tn));
  m.fnr_percent = 100.0 * safe_ratio(double(c.fn), double(c.fn + c.tp));
  return m;
}

Metrics compute_metrics(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw InvalidArgument("compute_metrics: length mismatch");
  }
  if (labels.empty()) throw InvalidArgument("compute_metrics: empty input");
  return metrics_from_counts(count_confusion(predictions, labels));
}

nlohmann::json to_json(const Metrics& m) {
  return {{"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1},
          {"fpr_percent", m.fpr_percent},
          {"fnr_percent", m.fnr_percent},
          {"tp", m.counts.tp},
          {"fp", m.counts.fp},
          {"tn", m.counts.tn},
          {"fn", m.counts.fn}};
}

Metrics metrics_from_json(const nlohmann::json& j) {
  ConfusionCounts c;
  c.tp = j.at("tp").get<std::size_t>();
  c.fp = j.at("fp").get<std::size_t>();
  c.tn = j.at("tn").get<std::size_t>();
  c.fn = j.at("fn").get<std::size_t>();
  return metrics_from_counts(c);
}

PreparedCorpus prepare_corpus(std::span<const KpmRecord> records, std::size_t window_steps,
                              double train_fraction, std::uint64_t split_seed) {
  if (window_steps < 1) throw InvalidArgument("window size must be >= 1");
  std::set<int> day_set;
  for (const auto& r : records) day_set.insert(r.day);

  PreparedCorpus corpus;
  corpus.window_steps = window_steps;
  std::vector<std::vector<Window>> raw_train;
  std::vector<std::vector<Window>> raw_test;
  for (int day : day_set) {
    std::vector<KpmRecord> day_records;
    for (const auto& r : records) {
      if (r.day == day) day_records.push_back(r);
    }
    sort_records(day_records);
    auto windows = make_windows(day_records, window_steps);
    if (windows.empty()) continue;
    auto split = split_train_test(windows, train_fraction, derive_seed(split_seed, std::uint64_t(day)));
    corpus.days.push_back(day);
    raw_train.push_back(std::move(split.train));
    raw_test.push_back(std::move(split.test));
  }
  if (corpus.days.empty()) throw InvalidArgument("prepare_corpus: no windows in corpus");

  std::vector<Window> all_train;
  for (const auto& t : raw_train) all_train.insert(all_train.end(), t.begin(), t.end());
  corpus.scaler = fit_scaler(all_train);
  for (std::size_t d = 0; d < corpus.days.size(); ++d) {
    corpus.train.push_back(apply_scaler(corpus.scaler, raw_train[d]));
    corpus.test.push_back(apply_scaler(corpus.scaler, raw_test[d]));
    bool pos = false;
    bool neg = false;
    for (const auto& w : corpus.test.back()) (w.label == 1 ? pos : neg) = true;
    corpus.test_valid.push_back(pos && neg);
  }
  return corpus;
}

RunRecord run_continual(const PreparedCorpus& corpus, double ratio, std::uint64_t seed,
                        const TrainConfig& train, double threshold) {
  const std::size_t n_days = corpus.days.size();
  RunRecord run;
  run.window = corpus.window_steps;
  run.ratio = ratio;
  run.seed = seed;
  run.f1.assign(n_days, std::vector<double>(n_days, kNaN));

  LstmParams params = init_model(seed, kNumFeatures, train.hidden);
  std::vector<Window> pool;
  for (std::size_t d = 0; d < n_days; ++d) {
    auto trainset = build_replay_trainset(corpus.train[d], pool, ratio, derive_seed(seed, d, 1));
    run.replay_truncated.push_back(trainset.truncated);

    std::vector<Window> fit_train;
    std::vector<Window> validation;
    if (train.validation_fraction > 0.0 && trainset.windows.size() >= 2) {
      auto split = split_train_test(trainset.windows, 1.0 - train.validation_fraction,
                                    derive_seed(seed, d, 2));
      fit_train = std::move(split.train);
      validation = std::move(split.test);
    } else {
      fit_train = std::move(trainset.windows);
    }

    TrainConfig day_config = train;
    day_config.seed = derive_seed(seed, d, 3);
    if (validation.empty()) day_config.patience = 0;
    auto fitted = fit(params, fit_train, validation, day_config);
    params = std::move(fitted.params);
    run.epochs.push_back(fitted.history.size());
    pool.insert(pool.end(), corpus.train[d].begin(), corpus.train[d].end());

    for (std::size_t e = 0; e <= d; ++e) {
      if (!corpus.test_valid[e]) continue;
      run.f1[d][e] =
          metrics_from_counts(evaluate(params, corpus.test[e], threshold, train.parallel)).f1;
    }
  }

  ConfusionCounts pooled;
  for (std::size_t e = 0; e < n_days; ++e) {
    const auto c = evaluate(params, corpus.test[e], threshold, train.parallel);
    run.final_per_day.push_back(metrics_from_counts(c));
    pooled += c;
  }
  run.final_pooled = metrics_from_counts(pooled);
  run.final_params = std::move(params);
  return run;
}

const CellSummary& ExperimentResult::cell(std::size_t window, double ratio) const {
  for (const auto& c : cells) {
    if (c.window == window && c.ratio == ratio) return c;
  }
  throw InvalidArgument(fmt::format("no sweep cell for window {} ratio {}", window, ratio));
}

std::vector<std::vector<double>> ExperimentResult::mean_f1(std::size_t window,
                                                           double ratio) const {
  const std::size_t n = days.size();
  std::vector<std::vector<double>> sum(n, std::vector<double>(n, 0.0));
  std::vector<std::vector<std::size_t>> count(n, std::vector<std::size_t>(n, 0));
  for (const auto& r : runs) {
    if (r.window != window || r.ratio != ratio) continue;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t e = 0; e < n; ++e) {
        if (!std::isnan(r.f1[a][e])) {
          sum[a][e] += r.f1[a][e];
          ++count[a][e];
        }
      }
    }
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t e = 0; e < n; ++e) {
      sum[a][e] = count[a][e] ? sum[a][e] / double(count[a][e]) : kNaN;
    }
  }
  return sum;
}

ExperimentResult sweep_window_ratio(std::span<const KpmRecord> records,
                                    const ExperimentConfig& config) {
  if (config.windows.empty() || config.ratios.empty() || config.seeds.empty()) {
    throw InvalidArgument("sweep: windows, ratios and seeds must be non-empty");
  }
  for (auto w : config.windows) {
    if (w < 1) throw InvalidArgument("sweep: window values must be >= 1");
  }
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<PreparedCorpus> corpora;
  for (auto w : config.windows) {
    corpora.push_back(prepare_corpus(records, w, config.train_fraction, config.split_seed));
  }

  struct Job {
    std::size_t corpus;
    double ratio;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t wi = 0; wi < config.windows.size(); ++wi) {
    for (double r : config.ratios) {
      for (auto s : config.seeds) jobs.push_back({wi, r, s});
    }
  }

  ExperimentResult result;
  result.config = config;
  result.days = corpora.front().days;
  result.runs.resize(jobs.size());
  // Jobs are independent; each job's training stays single-threaded when
  // running inside this region because nested parallelism is inactive.
  if (config.parallel_jobs) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(jobs.size()); ++j) {
      const auto& job = jobs[std::size_t(j)];
      result.runs[std::size_t(j)] =
          run_continual(corpora[job.corpus], job.ratio, job.seed, config.train, config.threshold);
    }
  } else {
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      result.runs[j] = run_continual(corpora[jobs[j].corpus], jobs[j].ratio, jobs[j].seed,
                                     config.train, config.threshold);
    }
  }

  for (auto w : config.windows) {
    for (double r : config.ratios) {
      CellSummary cell{w, r, 0.0, 0.0, 0.0, 0.0};
      std::size_t n = 0;
      for (const auto& run : result.runs) {
        if (run.window != w || run.ratio != r) continue;
        cell.f1 += run.final_pooled.f1;
        cell.fpr_percent += run.final_pooled.fpr_percent;
        cell.fnr_percent += run.final_pooled.fnr_percent;
        std::vector<double> per_day;
        for (std::size_t e = 0; e < run.f1.size(); ++e) per_day.push_back(run.f1.back()[e]);
        cell.mean_day_f1 += nan_mean(per_day);
        ++n;
      }
      cell.f1 /= double(n);
      cell.fpr_percent /= double(n);
      cell.fnr_percent /= double(n);
      cell.mean_day_f1 /= double(n);
      result.cells.push_back(cell);
    }
  }
  for (std::size_t i = 1; i < result.cells.size(); ++i) {
    if (result.cells[i].f1 > result.cells[result.best_cell].f1) result.best_cell = i;
  }
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

ExperimentResult run_sequential_days(std::span<const KpmRecord> records,
                                     std::span<const double> ratios, std::size_t window,
                                     const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.windows = {window};
  c.ratios.assign(ratios.begin(), ratios.end());
  return sweep_window_ratio(records, c);
}

void write_experiment_outputs(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& cfg = result.config;
  const std::size_t n_days = result.days.size();

  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write " + (dir / name).string());
    return out;
  };

  {
    // Final-model F1 on each day's held-out set, seed-averaged.
    auto out = open("table4.csv");
    out << "window,ratio";
    for (int d : result.days) out << ",day" << d;
    out << ",mean\n";
    for (auto w : cfg.windows) {
      for (double r : cfg.ratios) {
        const auto m = result.mean_f1(w, r);
        out << w << ',' << fmt::format("{:.2f}", r);
        for (std::size_t e = 0; e < n_days; ++e) out << ',' << csv_number(m.back()[e]);
        out << ',' << csv_number(nan_mean(m.back())) << '\n';
      }
    }
  }
  {
    auto out = open("fig4_series.csv");
    out << "window,ratio,after_day,eval_day,f1\n";
    for (auto w : cfg.windows) {
      for (double r : cfg.ratios) {
        const auto m = result.mean_f1(w, r);
        for (std::size_t a = 0; a < n_days; ++a) {
          for (std::size_t e = 0; e <= a; ++e) {
            out << w << ',' << fmt::format("{:.2f}", r) << ',' << result.days[a] << ','
                << result.days[e] << ',' << csv_number(m[a][e]) << '\n';
          }
          out << w << ',' << fmt::format("{:.2f}", r) << ',' << result.days[a] << ",mean,"
              << csv_number(nan_mean(std::span<const double>(m[a]).first(a + 1))) << '\n';
        }
      }
    }
  }
  auto write_grid = [&](const char* name, double CellSummary::*field) {
    auto out = open(name);
    out << "window";
    for (double r : cfg.ratios) out << ',' << fmt::format("ratio_{:.2f}", r);
    out << '\n';
    for (auto w : cfg.windows) {
      out << w;
      for (double r : cfg.ratios) out << ',' << csv_number(result.cell(w, r).*field);
      out << '\n';
    }
  };
  write_grid("fig5_fpr.csv", &CellSummary::fpr_percent);
  write_grid("fig5_fnr.csv", &CellSummary::fnr_percent);
  write_grid("fig5_f1.csv", &CellSummary::f1);

  nlohmann::json summary;
  summary["days"] = result.days;
  summary["windows"] = cfg.windows;
  summary["ratios"] = cfg.ratios;
  summary["seeds"] = cfg.seeds;
  summary["seconds"] = result.seconds;
  auto& cells = summary["cells"] = nlohmann::json::array();
  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    const auto& c = result.cells[i];
    cells.push_back({{"window", c.window},
                     {"ratio", c.ratio},
                     {"f1", json_number(c.f1)},
                     {"fpr_percent", json_number(c.fpr_percent)},
                     {"fnr_percent", json_number(c.fnr_percent)},
                     {"mean_day_f1", json_number(c.mean_day_f1)},
                     {"f1_regret", json_number(result.cells[result.best_cell].f1 - c.f1)},
                     {"selected", i == result.best_cell}});
  }
  auto& runs = summary["runs"] = nlohmann::json::array();
  for (const auto& r : result.runs) {
    nlohmann::json f1 = nlohmann::json::array();
    for (const auto& row : r.f1) {
      nlohmann::json jr = nlohmann::json::array();
      for (double v : row) jr.push_back(json_number(v));
      f1.push_back(jr);
    }
    runs.push_back({{"window", r.window},
                    {"ratio", r.ratio},
                    {"seed", r.seed},
                    {"f1", f1},
                    {"epochs", r.epochs},
                    {"replay_truncated", r.replay_truncated},
                    {"final_f1", r.final_pooled.f1},
                    {"final_fpr_percent", r.final_pooled.fpr_percent},
                    {"final_fnr_percent", r.final_pooled.fnr_percent}});
  }
  auto out = open("summary.json");
  out << summary.dump(2) << '\n';
}

}  // namespace sentinel
