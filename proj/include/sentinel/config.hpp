#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "sentinel/error.hpp"
#include "sentinel/eval.hpp"
#include "sentinel/kpm_data.hpp"

namespace sentinel {

/// Invalid or unknown configuration entry; `key()` is the dotted path.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what);
  [[nodiscard]] const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Class statistics file: one entry per feature,
///   <feature>: {normal_mean, normal_std, attack_mean, attack_std}
FeatureStats parse_stats_yaml(std::string_view text);
FeatureStats load_stats_yaml(const std::filesystem::path& path);
std::string format_stats_yaml(const FeatureStats& stats);

/// Synthetic scenario: corpus shape, traffic profiles and the labeled schedule.
/// The stats part of the returned config is left empty.
SynthConfig parse_scenario_yaml(std::string_view text);
SynthConfig load_synth_config(const std::filesystem::path& stats_path,
                              const std::filesystem::path& scenario_path);

/// Top-level experiment file. Relative paths resolve against the file's
/// directory. Either `corpus` (a KPM CSV) or `stats` + `scenario` is required.
struct ExperimentFile {
  ExperimentConfig experiment;
  std::filesystem::path corpus;
  std::filesystem::path stats;
  std::filesystem::path scenario;
  std::filesystem::path output_dir = "results";
};

ExperimentFile parse_experiment_yaml(std::string_view text,
                                     const std::filesystem::path& base_dir = {});
ExperimentFile load_experiment_yaml(const std::filesystem::path& path);
/// Fully expanded config with absolute paths; parsing it yields the same run.
std::string format_experiment_yaml(const ExperimentFile& file);

}  // namespace sentinel
