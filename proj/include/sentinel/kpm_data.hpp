#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sentinel/error.hpp"

namespace sentinel {

inline constexpr std::size_t kNumFeatures = 14;

/// Fixed feature order shared by every record, window, and table.
inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "epre",   "pusch_snr", "p_ue",    "ul_mcs",  "cqi",        "ul_bitrate", "dl_mcs",
    "dl_retx", "ul_tx",    "dl_tx",   "ul_retx", "dl_bitrate", "dl_err",     "ul_err"};

/// KPM reporting period of the RAN data collector, in seconds.
inline constexpr double kSamplingPeriodSeconds = 5.0;

std::optional<std::size_t> feature_index(std::string_view name);

using FeatureVector = std::array<double, kNumFeatures>;

/// One KPM sample of one UE.
struct KpmRecord {
  std::int64_t timestamp = 0;
  std::string ue_id;
  FeatureVector features{};
  int label = 0;  // 0 benign, 1 malicious
  int day = 0;
};

struct ClassMoments {
  FeatureVector mean{};
  FeatureVector std{};
};

/// Per-class mean/std of every feature (normalized or raw units, depending on
/// which records it was computed from).
struct FeatureStats {
  ClassMoments normal;
  ClassMoments attack;

  /// (attack_mean - normal_mean) / |normal_mean| * 100; NaN when the normal
  /// mean is zero.
  [[nodiscard]] FeatureVector percent_difference() const;
};

/// MinMax scaler fit on the training split.
struct Scaler {
  FeatureVector min{};
  FeatureVector max{};

  [[nodiscard]] double transform(std::size_t feature, double value) const;

  friend bool operator==(const Scaler&, const Scaler&) = default;
};

/// A W x 14 row-major block of consecutive samples of one UE.
struct Window {
  std::vector<double> values;
  std::size_t steps = 0;
  int label = 0;
  std::string ue_id;
  std::int64_t start_timestamp = 0;
  int day = 0;

  [[nodiscard]] double at(std::size_t step, std::size_t feature) const {
    return values[step * kNumFeatures + feature];
  }
  [[nodiscard]] std::span<const double> row(std::size_t step) const {
    return std::span<const double>(values).subspan(step * kNumFeatures, kNumFeatures);
  }
};

struct CsvLoadResult {
  std::vector<KpmRecord> records;
  std::size_t dropped_rows = 0;  // rows with a missing or NaN feature
};

CsvLoadResult load_kpm_csv(const std::filesystem::path& path);
CsvLoadResult parse_kpm_csv(std::string_view text);
void write_kpm_csv(const std::filesystem::path& path, std::span<const KpmRecord> records);
std::string format_kpm_csv(std::span<const KpmRecord> records);

/// Sorts by (ue_id, timestamp).
void sort_records(std::vector<KpmRecord>& records);

FeatureStats compute_class_stats(std::span<const KpmRecord> records);

Scaler fit_scaler(std::span<const KpmRecord> train);
Scaler fit_scaler(std::span<const Window> train);
std::vector<KpmRecord> apply_scaler(const Scaler& scaler, std::span<const KpmRecord> records);
std::vector<Window> apply_scaler(const Scaler& scaler, std::span<const Window> windows);

/// Sliding windows (stride 1 by default) over each UE's contiguous runs.
/// Records must be sorted by (ue_id, timestamp). A run breaks whenever two
/// consecutive samples are more than 1.5 sampling periods apart. The window
/// carries the label of its last timestep.
std::vector<Window> make_windows(std::span<const KpmRecord> records, std::size_t steps,
                                 std::size_t stride = 1,
                                 double sampling_period = kSamplingPeriodSeconds);

struct TrainTestSplit {
  std::vector<Window> train;
  std::vector<Window> test;
};

/// Stratified, seeded split. Each class with at least two members keeps at
/// least one member on each side.
TrainTestSplit split_train_test(std::span<const Window> windows, double train_fraction,
                                std::uint64_t seed);

struct ReplayTrainset {
  std::vector<Window> windows;
  std::size_t replayed = 0;
  bool truncated = false;  // pool was smaller than floor(ratio * |new_day|)
};

/// new_day plus a seeded uniform sample (without replacement) of
/// floor(ratio * |new_day|) windows from the pool of earlier days.
ReplayTrainset build_replay_trainset(std::span<const Window> new_day,
                                     std::span<const Window> pool, double ratio,
                                     std::uint64_t seed);

/// Per-feature override of the class moments used by the synthetic generator.
struct FeatureOverride {
  double mean = 0.0;
  double std = 0.0;
};

/// Named traffic profile: a sparse set of features whose marginals deviate
/// from the class statistics (an attack signature or a benign traffic regime).
struct TrafficProfile {
  std::map<std::string, FeatureOverride, std::less<>> overrides;
};

/// Marks samples [start, end) of UE `ue` on day `day`.
struct ScheduleEntry {
  int day = 0;
  std::size_t ue = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  int label = 1;
  std::string profile;  // empty: plain class statistics
};

struct SynthConfig {
  FeatureStats stats;
  std::map<std::string, TrafficProfile, std::less<>> profiles;
  std::vector<ScheduleEntry> schedule;
  int days = 1;
  std::size_t ues = 1;
  std::size_t samples_per_ue = 1;
  double correlation = 0.8;
  std::int64_t start_epoch = 1723939200;  // 2024-08-18T00:00:00Z
  std::uint64_t seed = 0;
};

/// Per-class AR(1) Gaussian series clipped to [0,1]. The latent Gaussian of
/// every (class, feature) is calibrated so that the clipped marginal has the
/// requested mean and standard deviation.
std::vector<KpmRecord> synthesize_dataset(const SynthConfig& config);

/// Latent (mean, std) of a normal whose clip to [0,1] has the given moments.
struct LatentGaussian {
  double mean = 0.0;
  double std = 0.0;
};
LatentGaussian calibrate_clipped_gaussian(double target_mean, double target_std);

/// Mean and std of clip(N(mean, std), 0, 1).
std::pair<double, double> clipped_gaussian_moments(double mean, double std);

}  // namespace sentinel
