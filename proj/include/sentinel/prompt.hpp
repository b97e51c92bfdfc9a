#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sentinel/kpm_data.hpp"
#include "sentinel/lime.hpp"

namespace sentinel {

enum class PromptMode { ZeroShot, FewShot };

std::string_view to_string(PromptMode mode);
PromptMode parse_prompt_mode(std::string_view text);  // "zero" | "few"

/// Everything the user prompt shows about one instance.
struct PromptInputs {
  FeatureStats stats;          // normalized class statistics
  std::size_t steps = 3;
  std::vector<double> window;  // steps x 14, row-major, oldest row first
  int predicted_label = 0;
  std::vector<LimeTerm> lime;  // in display order
  std::vector<double> shap_local;   // steps x 14
  std::vector<double> shap_global;  // steps x 14
};

nlohmann::json to_json(const PromptInputs& inputs);
PromptInputs prompt_inputs_from_json(const nlohmann::json& j);
PromptInputs load_prompt_inputs(const std::filesystem::path& path);

struct ChatMessage {
  std::string role;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct Exemplar {
  std::string user_text;
  std::string assistant_text;

  friend bool operator==(const Exemplar&, const Exemplar&) = default;
};

struct PromptBundle {
  PromptMode mode = PromptMode::ZeroShot;
  std::string system_text;
  std::string user_text;
  std::vector<Exemplar> exemplars;

  /// system, then each exemplar as a user/assistant pair, then the query.
  [[nodiscard]] std::vector<ChatMessage> messages() const;

  friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

std::string system_text(PromptMode mode);
std::string task_text(PromptMode mode);

/// User prompt: feature statistics, input sequence, prediction, LIME table,
/// SHAP local heatmap, global SHAP importance, task.
std::string render_user_prompt(const PromptInputs& inputs, PromptMode mode);

PromptBundle render_prompt(const PromptInputs& inputs, PromptMode mode,
                           std::span<const Exemplar> exemplars = {});

/// Exemplar directory: manifest.json lists {"inputs": file, "response": file}
/// entries in order; user prompts are rendered in few-shot layout.
std::vector<Exemplar> load_exemplars(const std::filesystem::path& dir);

/// ceil(1.35 * whitespace-delimited words)
std::size_t estimate_tokens(std::string_view text);
std::size_t estimate_tokens(const PromptBundle& bundle);

/// {"system": ..., "messages": [{"role", "content"}, ...]}
nlohmann::json to_json(const PromptBundle& bundle);
PromptBundle prompt_bundle_from_json(const nlohmann::json& j);

/// SHA-256 (hex) of the compact JSON form.
std::string bundle_digest(const PromptBundle& bundle);

std::string sha256_hex(std::string_view data);

}  // namespace sentinel
