#include "sentinel/kpm_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>

namespace sentinel {

namespace {

constexpr std::string_view kTimestampColumn = "timestamp";
constexpr std::string_view kUeColumn = "ue_id";
constexpr std::string_view kLabelColumn = "label";
constexpr std::string_view kDayColumn = "day";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

bool is_missing(std::string_view cell) {
  if (cell.empty()) return true;
  std::string lower(cell);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return lower == "nan" || lower == "na" || lower == "null";
}

template <typename T>
T parse_number(std::string_view cell, std::size_t line_no, std::string_view column) {
  T value{};
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
    throw ParseError(fmt::format("line {}: cannot parse '{}' in column '{}'", line_no, cell, column));
  }
  return value;
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

std::optional<std::size_t> feature_index(std::string_view name) {
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    if (kFeatureNames[i] == name) return i;
  }
  return std::nullopt;
}

FeatureVector FeatureStats::percent_difference() const {
  FeatureVector out{};
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    const double base = std::abs(normal.mean[f]);
    out[f] = base == 0.0 ? std::nan("") : (attack.mean[f] - normal.mean[f]) / base * 100.0;
  }
  return out;
}

double Scaler::transform(std::size_t feature, double value) const {
  const double lo = min[feature];
  const double range = max[feature] - lo;
  // A constant column carries no information and maps to 0.
  if (range <= 0.0) return 0.0;
  return std::clamp((value - lo) / range, 0.0, 1.0);
}

CsvLoadResult parse_kpm_csv(std::string_view text) {
  CsvLoadResult result;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    auto nl = text.find('\n', pos);
    line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    return true;
  };

  std::string_view header_line;
  if (!next_line(header_line) || trim(header_line).empty()) {
    throw SchemaError(std::string(kTimestampColumn));
  }
  const auto header = split_fields(header_line);
  auto column_of = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  };
  auto require = [&](std::string_view name) {
    auto idx = column_of(name);
    if (!idx) throw SchemaError(std::string(name));
    return *idx;
  };

  const std::size_t ts_col = require(kTimestampColumn);
  const std::size_t ue_col = require(kUeColumn);
  std::array<std::size_t, kNumFeatures> feature_cols{};
  for (std::size_t f = 0; f < kNumFeatures; ++f) feature_cols[f] = require(kFeatureNames[f]);
  const std::size_t label_col = require(kLabelColumn);
  const auto day_col = column_of(kDayColumn);

  std::string_view line;
  while (next_line(line)) {
    if (trim(line).empty()) continue;
    const auto cells = split_fields(line);
    if (cells.size() != header.size()) {
      throw ParseError(fmt::format("line {}: expected {} fields, found {}", line_no,
                                   header.size(), cells.size()));
    }
    KpmRecord rec;
    rec.timestamp = parse_number<std::int64_t>(cells[ts_col], line_no, kTimestampColumn);
    rec.ue_id = std::string(cells[ue_col]);
    bool missing = false;
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      const auto cell = cells[feature_cols[f]];
      if (is_missing(cell)) {
        missing = true;
        continue;
      }
      const double v = parse_number<double>(cell, line_no, kFeatureNames[f]);
      if (!std::isfinite(v)) {
        missing = true;
        continue;
      }
      rec.features[f] = v;
    }
    rec.label = parse_number<int>(cells[label_col], line_no, kLabelColumn);
    if (rec.label != 0 && rec.label != 1) {
      throw ParseError(fmt::format("line {}: label must be 0 or 1, got {}", line_no, rec.label));
    }
    if (day_col) rec.day = parse_number<int>(cells[*day_col], line_no, kDayColumn);
    if (missing) {
      ++result.dropped_rows;
      continue;
    }
    result.records.push_back(std::move(rec));
  }
  sort_records(result.records);
  return result;
}

CsvLoadResult load_kpm_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_kpm_csv(buf.str());
}

std::string format_kpm_csv(std::span<const KpmRecord> records) {
  std::string out = "timestamp,ue_id";
  for (auto name : kFeatureNames) {
    out += ',';
    out += name;
  }
  out += ",label,day\n";
  for (const auto& r : records) {
    out += fmt::format("{},{}", r.timestamp, r.ue_id);
    for (double v : r.features) out += fmt::format(",{:.6g}", v);
    out += fmt::format(",{},{}\n", r.label, r.day);
  }
  return out;
}

void write_kpm_csv(const std::filesystem::path& path, std::span<const KpmRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << format_kpm_csv(records);
}

void sort_records(std::vector<KpmRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const KpmRecord& a, const KpmRecord& b) {
    if (a.ue_id != b.ue_id) return a.ue_id < b.ue_id;
    return a.timestamp < b.timestamp;
  });
}

FeatureStats compute_class_stats(std::span<const KpmRecord> records) {
  std::array<std::size_t, 2> count{};
  std::array<FeatureVector, 2> sum{};
  for (const auto& r : records) {
    ++count[r.label];
    for (std::size_t f = 0; f < kNumFeatures; ++f) sum[r.label][f] += r.features[f];
  }
  if (count[0] == 0 || count[1] == 0) throw InvalidArgument("missing class");

  std::array<FeatureVector, 2> mean{};
  for (int c = 0; c < 2; ++c) {
    for (std::size_t f = 0; f < kNumFeatures; ++f) mean[c][f] = sum[c][f] / double(count[c]);
  }
  std::array<FeatureVector, 2> sq{};
  for (const auto& r : records) {
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      const double d = r.features[f] - mean[r.label][f];
      sq[r.label][f] += d * d;
    }
  }
  FeatureStats stats;
  ClassMoments* out[2] = {&stats.normal, &stats.attack};
  for (int c = 0; c < 2; ++c) {
    out[c]->mean = mean[c];
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      // Sample standard deviation (n - 1), zero for a single record.
      out[c]->std[f] = count[c] > 1 ? std::sqrt(sq[c][f] / double(count[c] - 1)) : 0.0;
    }
  }
  return stats;
}

Scaler fit_scaler(std::span<const KpmRecord> train) {
  if (train.empty()) throw InvalidArgument("fit_scaler: empty input");
  Scaler s;
  s.min = train.front().features;
  s.max = train.front().features;
  for (const auto& r : train) {
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      s.min[f] = std::min(s.min[f], r.features[f]);
      s.max[f] = std::max(s.max[f], r.features[f]);
    }
  }
  return s;
}

Scaler fit_scaler(std::span<const Window> train) {
  if (train.empty()) throw InvalidArgument("fit_scaler: empty input");
  Scaler s;
  s.min.fill(std::numeric_limits<double>::infinity());
  s.max.fill(-std::numeric_limits<double>::infinity());
  for (const auto& w : train) {
    for (std::size_t t = 0; t < w.steps; ++t) {
      for (std::size_t f = 0; f < kNumFeatures; ++f) {
        s.min[f] = std::min(s.min[f], w.at(t, f));
        s.max[f] = std::max(s.max[f], w.at(t, f));
      }
    }
  }
  return s;
}

std::vector<KpmRecord> apply_scaler(const Scaler& scaler, std::span<const KpmRecord> records) {
  if (records.empty()) throw InvalidArgument("apply_scaler: empty input");
  std::vector<KpmRecord> out(records.begin(), records.end());
  for (auto& r : out) {
    for (std::size_t f = 0; f < kNumFeatures; ++f) r.features[f] = scaler.transform(f, r.features[f]);
  }
  return out;
}

std::vector<Window> apply_scaler(const Scaler& scaler, std::span<const Window> windows) {
  std::vector<Window> out(windows.begin(), windows.end());
  for (auto& w : out) {
    for (std::size_t i = 0; i < w.values.size(); ++i) {
      w.values[i] = scaler.transform(i % kNumFeatures, w.values[i]);
    }
  }
  return out;
}

std::vector<Window> make_windows(std::span<const KpmRecord> records, std::size_t steps,
                                 std::size_t stride, double sampling_period) {
  if (steps < 1) throw InvalidArgument("make_windows: window length must be >= 1");
  if (stride < 1) throw InvalidArgument("make_windows: stride must be >= 1");
  const double max_gap = 1.5 * sampling_period;

  std::vector<Window> out;
  auto emit_run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i + steps <= end; i += stride) {
      Window w;
      w.steps = steps;
      w.values.reserve(steps * kNumFeatures);
      for (std::size_t t = 0; t < steps; ++t) {
        const auto& f = records[i + t].features;
        w.values.insert(w.values.end(), f.begin(), f.end());
      }
      const auto& last = records[i + steps - 1];
      w.label = last.label;
      w.ue_id = records[i].ue_id;
      w.start_timestamp = records[i].timestamp;
      w.day = last.day;
      out.push_back(std::move(w));
    }
  };

  std::size_t run_start = 0;
  for (std::size_t i = 1; i <= records.size(); ++i) {
    const bool boundary =
        i == records.size() || records[i].ue_id != records[i - 1].ue_id ||
        records[i].timestamp <= records[i - 1].timestamp ||
        double(records[i].timestamp - records[i - 1].timestamp) > max_gap;
    if (boundary) {
      emit_run(run_start, i);
      run_start = i;
    }
  }
  return out;
}

TrainTestSplit split_train_test(std::span<const Window> windows, double train_fraction,
                                std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("split_train_test: train_fraction must be in (0,1)");
  }
  if (windows.empty()) throw InvalidArgument("split_train_test: empty input");

  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < windows.size(); ++i) by_class[windows[i].label].push_back(i);

  std::mt19937_64 rng(seed);
  std::vector<char> in_train(windows.size(), 0);
  for (auto& idx : by_class) {
    const std::size_t n = idx.size();
    if (n == 0) continue;
    std::shuffle(idx.begin(), idx.end(), rng);
    auto take = static_cast<std::size_t>(std::llround(train_fraction * double(n)));
    if (n >= 2) take = std::clamp<std::size_t>(take, 1, n - 1);
    for (std::size_t k = 0; k < take; ++k) in_train[idx[k]] = 1;
  }

  TrainTestSplit split;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    (in_train[i] ? split.train : split.test).push_back(windows[i]);
  }
  return split;
}

ReplayTrainset build_replay_trainset(std::span<const Window> new_day,
                                     std::span<const Window> pool, double ratio,
                                     std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw InvalidArgument("build_replay_trainset: ratio must be in [0,1]");
  }
  ReplayTrainset out;
  out.windows.assign(new_day.begin(), new_day.end());
  const auto requested = static_cast<std::size_t>(std::floor(ratio * double(new_day.size())));
  if (requested == 0) return out;

  std::size_t take = requested;
  if (pool.size() < requested) {
    take = pool.size();
    out.truncated = true;
  }
  // Partial Fisher-Yates: the first `take` slots become a uniform sample.
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < take; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
    std::swap(idx[k], idx[pick(rng)]);
    out.windows.push_back(pool[idx[k]]);
  }
  out.replayed = take;
  return out;
}

std::pair<double, double> clipped_gaussian_moments(double mean, double std) {
  if (std <= 0.0) {
    const double v = std::clamp(mean, 0.0, 1.0);
    return {v, 0.0};
  }
  const double a = (0.0 - mean) / std;
  const double b = (1.0 - mean) / std;
  const double pa = normal_cdf(a);
  const double pb = normal_cdf(b);
  const double mid = pb - pa;
  const double upper = 1.0 - pb;
  const double da = normal_pdf(a);
  const double db = normal_pdf(b);
  const double m1 = mean * mid + std * (da - db) + upper;
  const double m2 = (mean * mean + std * std) * mid + 2.0 * mean * std * (da - db) +
                    std * std * (a * da - b * db) + upper;
  return {m1, std::sqrt(std::max(0.0, m2 - m1 * m1))};
}

LatentGaussian calibrate_clipped_gaussian(double target_mean, double target_std) {
  if (target_mean <= 0.0) return {0.0, 0.0};
  if (target_mean >= 1.0) return {1.0, 0.0};
  if (target_std <= 0.0) return {target_mean, 0.0};

  auto mean_for_std = [&](double sigma) {
    double lo = -20.0 - 60.0 * sigma;
    double hi = 21.0 + 60.0 * sigma;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (clipped_gaussian_moments(mid, sigma).first < target_mean) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  };

  // The clipped std grows monotonically with the latent std along the
  // constant-mean curve, up to sqrt(m(1-m)); bisect in log space.
  double lo = std::log(1e-9);
  double hi = std::log(1e4);
  for (int it = 0; it < 120; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double sigma = std::exp(mid);
    const double s = clipped_gaussian_moments(mean_for_std(sigma), sigma).second;
    if (s < target_std) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double sigma = std::exp(0.5 * (lo + hi));
  return {mean_for_std(sigma), sigma};
}

std::vector<KpmRecord> synthesize_dataset(const SynthConfig& config) {
  if (config.days < 1 || config.ues < 1 || config.samples_per_ue < 1) {
    throw InvalidArgument("synthesize_dataset: days, ues and samples_per_ue must be >= 1");
  }
  if (!(config.correlation >= 0.0 && config.correlation < 1.0)) {
    throw InvalidArgument("synthesize_dataset: correlation must be in [0,1)");
  }

  // Latent parameters for every (class or profile, feature) pair.
  using Latents = std::array<LatentGaussian, kNumFeatures>;
  auto calibrate = [](const ClassMoments& m) {
    Latents out{};
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      out[f] = calibrate_clipped_gaussian(m.mean[f], m.std[f]);
    }
    return out;
  };
  const std::array<Latents, 2> base = {calibrate(config.stats.normal),
                                       calibrate(config.stats.attack)};

  struct Regime {
    Latents latents;
  };
  std::vector<Regime> regimes;  // one per schedule entry
  regimes.reserve(config.schedule.size());
  for (const auto& e : config.schedule) {
    if (e.day < 1 || e.day > config.days) {
      throw InvalidArgument(fmt::format("schedule: day {} outside 1..{}", e.day, config.days));
    }
    if (e.ue >= config.ues) {
      throw InvalidArgument(fmt::format("schedule: ue {} outside 0..{}", e.ue, config.ues - 1));
    }
    if (e.start >= e.end) throw InvalidArgument("schedule: empty interval");
    if (e.label != 0 && e.label != 1) throw InvalidArgument("schedule: label must be 0 or 1");
    ClassMoments moments = e.label == 1 ? config.stats.attack : config.stats.normal;
    if (!e.profile.empty()) {
      auto it = config.profiles.find(e.profile);
      if (it == config.profiles.end()) {
        throw InvalidArgument("schedule: unknown profile '" + e.profile + "'");
      }
      for (const auto& [name, ov] : it->second.overrides) {
        auto f = feature_index(name);
        if (!f) throw InvalidArgument("profile '" + e.profile + "': unknown feature '" + name + "'");
        moments.mean[*f] = ov.mean;
        moments.std[*f] = ov.std;
      }
    }
    regimes.push_back({calibrate(moments)});
  }

  const double rho = config.correlation;
  const double innovation = std::sqrt(1.0 - rho * rho);
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<KpmRecord> out;
  out.reserve(std::size_t(config.days) * config.ues * config.samples_per_ue);
  for (int day = 1; day <= config.days; ++day) {
    for (std::size_t ue = 0; ue < config.ues; ++ue) {
      // Schedule entries touching this (day, UE), in declaration order.
      std::vector<std::size_t> active;
      for (std::size_t k = 0; k < config.schedule.size(); ++k) {
        if (config.schedule[k].day == day && config.schedule[k].ue == ue) active.push_back(k);
      }
      FeatureVector z{};
      for (auto& v : z) v = gauss(rng);  // stationary start
      for (std::size_t t = 0; t < config.samples_per_ue; ++t) {
        if (t > 0) {
          for (auto& v : z) v = rho * v + innovation * gauss(rng);
        }
        const Latents* latents = &base[0];
        int label = 0;
        for (auto k : active) {
          const auto& e = config.schedule[k];
          if (t >= e.start && t < e.end) {
            latents = &regimes[k].latents;
            label = e.label;
          }
        }
        KpmRecord rec;
        rec.timestamp = config.start_epoch + std::int64_t(day - 1) * 86400 +
                        std::int64_t(t) * std::int64_t(kSamplingPeriodSeconds);
        rec.ue_id = fmt::format("ue-{:02d}", ue);
        rec.day = day;
        rec.label = label;
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
          const auto& lg = (*latents)[f];
          rec.features[f] = std::clamp(lg.mean + lg.std * z[f], 0.0, 1.0);
        }
        out.push_back(std::move(rec));
      }
    }
  }
  sort_records(out);
  return out;
}

}  // namespace sentinel
