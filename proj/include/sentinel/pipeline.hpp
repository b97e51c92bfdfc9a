#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sentinel/eval.hpp"
#include "sentinel/lime.hpp"
#include "sentinel/lstm.hpp"
#include "sentinel/prompt.hpp"
#include "sentinel/shap.hpp"

namespace sentinel {

/// Everything the explain stage needs besides the weights, produced at
/// training time and stored next to the model.
struct DetectorContext {
  std::size_t window_steps = 3;
  FeatureStats stats;  // normalized per-class statistics of the training records
  QuartileDiscretizer discretizer;
  std::vector<double> background;  // mean normalized training window
  GlobalImportance global;         // mean |SHAP| over sampled held-out windows
  Metrics test_metrics;
  std::size_t train_windows = 0;
  std::size_t test_windows = 0;
};

nlohmann::json to_json(const DetectorContext& context);
DetectorContext context_from_json(const nlohmann::json& j);
/// model.bin -> model.context.json
std::filesystem::path context_path_for(const std::filesystem::path& model_path);
void save_context(const DetectorContext& context, const std::filesystem::path& path);
DetectorContext load_context(const std::filesystem::path& path);

struct TrainOptions {
  std::size_t window_steps = 3;
  double train_fraction = 0.8;
  std::uint64_t split_seed = 42;
  TrainConfig train;
  bool continual = false;  // day-by-day fine-tuning with replay instead of pooled training
  double ratio = 0.3;
  double threshold = kDefaultThreshold;
  std::size_t global_samples = 50;
  std::size_t global_coalitions = 1024;
};

struct TrainOutcome {
  DetectorModel model;
  DetectorContext context;
  std::vector<EpochRecord> history;  // pooled mode only
};

TrainOutcome train_detector(std::span<const KpmRecord> records, const TrainOptions& options);

struct DetectionRecord {
  std::size_t window_id = 0;
  std::string ue_id;
  int day = 0;
  std::int64_t start_timestamp = 0;
  double probability = 0.0;
  int label = 0;
  std::optional<int> true_label;
  std::vector<double> values;  // normalized window, steps x 14

  [[nodiscard]] std::size_t steps() const { return values.size() / kNumFeatures; }
};

nlohmann::json to_json(const DetectionRecord& record);
DetectionRecord detection_from_json(const nlohmann::json& j);

/// Scales and windows the records exactly as in training and scores every
/// window. Records need not be sorted.
std::vector<DetectionRecord> detect(const DetectorModel& model, std::vector<KpmRecord> records);

std::vector<DetectionRecord> load_detections(const std::filesystem::path& jsonl);
std::optional<DetectionRecord> find_detection(const std::filesystem::path& jsonl,
                                              std::size_t window_id);

struct ExplainOptions {
  LimeConfig lime;
  ShapConfig shap;
  PromptMode mode = PromptMode::ZeroShot;
  std::vector<Exemplar> exemplars;
};

struct ExplainResult {
  double probability = 0.0;
  int label = 0;
  LimeExplanation lime;
  ShapExplanation shap;
  PromptInputs prompt_inputs;
  PromptBundle bundle;
  double lime_ms = 0.0;
  double shap_ms = 0.0;
  double prompt_ms = 0.0;
};

/// LIME and Kernel SHAP on the detector probability, then the prompt.
ExplainResult explain_detection(const DetectorModel& model, const DetectorContext& context,
                                const DetectionRecord& detection, const ExplainOptions& options);

/// Insight report document; `insight` and `readability` are null when the
/// provider failed, with the failure in `error`.
nlohmann::json make_report(const DetectionRecord& detection, const ExplainResult& result,
                           const DetectorContext& context, const nlohmann::json& insight,
                           const nlohmann::json& readability, const std::string& error,
                           const nlohmann::json& timing_ms);

}  // namespace sentinel
