#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sentinel/kpm_data.hpp"
#include "sentinel/lstm.hpp"

namespace sentinel {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Precision, recall and F1 are fractions; FPR and FNR are percentages.
/// Ratios with a zero denominator are reported as 0.
struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double fpr_percent = 0.0;
  double fnr_percent = 0.0;
  ConfusionCounts counts;
};

Metrics metrics_from_counts(const ConfusionCounts& counts);
Metrics compute_metrics(std::span<const int> predictions, std::span<const int> labels);

nlohmann::json to_json(const Metrics& metrics);
Metrics metrics_from_json(const nlohmann::json& j);

/// Windowed, split and normalized corpus. Every day keeps one fixed held-out
/// set; the scaler is fit on the union of the training splits only.
struct PreparedCorpus {
  std::size_t window_steps = 0;
  std::vector<int> days;                      // ascending day indices
  std::vector<std::vector<Window>> train;     // per day
  std::vector<std::vector<Window>> test;      // per day
  std::vector<bool> test_valid;               // per day: both classes present
  Scaler scaler;
};

PreparedCorpus prepare_corpus(std::span<const KpmRecord> records, std::size_t window_steps,
                              double train_fraction, std::uint64_t split_seed);

struct ExperimentConfig {
  std::vector<std::size_t> windows{3};
  std::vector<double> ratios{0.0, 0.3};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  TrainConfig train;
  double train_fraction = 0.8;
  std::uint64_t split_seed = 42;
  double threshold = kDefaultThreshold;
  bool parallel_jobs = true;
};

/// One (window, ratio, seed) continual-training run.
struct RunRecord {
  std::size_t window = 0;
  double ratio = 0.0;
  std::uint64_t seed = 0;
  /// f1[a][e]: F1 of the model trained through day a on the held-out set of
  /// day e (e <= a); NaN when e > a or the day's held-out set is invalid.
  std::vector<std::vector<double>> f1;
  std::vector<Metrics> final_per_day;  // final model on each day's held-out set
  Metrics final_pooled;                // final model on all held-out sets
  std::vector<std::size_t> epochs;     // epochs trained per day
  std::vector<bool> replay_truncated;  // per day
  LstmParams final_params;             // weights after the last day
};

/// Trains on the first day, then for each later day fine-tunes the previous
/// weights on the day's windows plus a replay sample of all earlier training
/// windows, evaluating on every day seen so far.
RunRecord run_continual(const PreparedCorpus& corpus, double ratio, std::uint64_t seed,
                        const TrainConfig& train, double threshold);

struct CellSummary {
  std::size_t window = 0;
  double ratio = 0.0;
  double f1 = 0.0;           // seed-mean pooled held-out F1 of the final model
  double fpr_percent = 0.0;  // seed-mean
  double fnr_percent = 0.0;  // seed-mean
  double mean_day_f1 = 0.0;  // seed-mean of the mean per-day F1 (final model)
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<int> days;
  std::vector<RunRecord> runs;     // ordered by (window, ratio, seed)
  std::vector<CellSummary> cells;  // ordered by (window, ratio)
  std::size_t best_cell = 0;       // smallest F1 regret (max F1, ties: first)
  double seconds = 0.0;

  [[nodiscard]] const CellSummary& cell(std::size_t window, double ratio) const;
  /// Seed-mean F1 matrix [after][eval] for one cell.
  [[nodiscard]] std::vector<std::vector<double>> mean_f1(std::size_t window,
                                                         double ratio) const;
};

ExperimentResult sweep_window_ratio(std::span<const KpmRecord> records,
                                    const ExperimentConfig& config);
ExperimentResult run_sequential_days(std::span<const KpmRecord> records,
                                     std::span<const double> ratios, std::size_t window,
                                     const ExperimentConfig& config);

/// Writes table4.csv, fig4_series.csv, fig5_fpr.csv, fig5_fnr.csv,
/// fig5_f1.csv and summary.json into `dir`.
void write_experiment_outputs(const ExperimentResult& result, const std::filesystem::path& dir);

/// 64-bit mix used to derive independent per-stage seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace sentinel
