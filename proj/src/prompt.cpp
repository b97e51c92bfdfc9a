#include "sentinel/prompt.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "sentinel/shap.hpp"

namespace sentinel {

namespace {

constexpr std::string_view kSystemZeroShot =
    "You are a cybersecurity expert analyzing LSTM outputs for DDoS detection.";

constexpr std::string_view kSystemFewShot =
    "You are a cybersecurity expert analyzing LSTM outputs for DDoS detection. Respond with 3 "
    "sections: Anomaly Summary (3-6 bullet points), Misclassification Likelihood (1-2 bullets), "
    "and Mitigation Steps (2-4 bullets).";

constexpr std::string_view kTaskZeroShot =
    "Provide a human-readable summary of the model's decision. Highlight the most influential "
    "features or patterns that contributed to the classification. Assess the likelihood of "
    "misclassification and suggest actionable mitigation strategies for the network operator.";

constexpr std::string_view kTaskFewShot =
    "Provide a human-readable summary of the model's decision. Highlight which features or "
    "patterns most influenced the classification outcome. Assess the likelihood of "
    "misclassification and suggest actionable mitigation steps for the network operator.";

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void check_shape(const PromptInputs& in) {
  const std::size_t cells = in.steps * kNumFeatures;
  if (in.steps == 0) throw InvalidArgument("prompt: steps must be positive");
  if (in.window.size() != cells) throw InvalidArgument("prompt: window shape mismatch");
  if (in.shap_local.size() != cells) throw InvalidArgument("prompt: local SHAP shape mismatch");
  if (in.shap_global.size() != cells) throw InvalidArgument("prompt: global SHAP shape mismatch");
  if (in.lime.empty()) throw InvalidArgument("prompt: LIME explanation is empty");
  if (in.predicted_label != 0 && in.predicted_label != 1) {
    throw InvalidArgument("prompt: prediction must be 0 or 1");
  }
}

std::string render_stats_table(const FeatureStats& stats) {
  std::string out =
      "| Feature | Normal Mean | Normal Std | Attack Mean | Attack Std |\n"
      "|---|---:|---:|---:|---:|\n";
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    out += fmt::format("| {} | {:.4f} | {:.4f} | {:.4f} | {:.4f} |\n", kFeatureNames[f],
                       stats.normal.mean[f], stats.normal.std[f], stats.attack.mean[f],
                       stats.attack.std[f]);
  }
  return out;
}

nlohmann::json matrix_json(std::span<const double> values, std::size_t steps) {
  auto rows = nlohmann::json::array();
  for (std::size_t t = 0; t < steps; ++t) {
    rows.push_back(std::vector<double>(values.begin() + std::ptrdiff_t(t * kNumFeatures),
                                       values.begin() + std::ptrdiff_t((t + 1) * kNumFeatures)));
  }
  return rows;
}

std::vector<double> matrix_from_json(const nlohmann::json& j, std::size_t steps,
                                     std::string_view key) {
  if (!j.is_array() || j.size() != steps) {
    throw ParseError(fmt::format("prompt inputs: '{}' must have {} rows", key, steps));
  }
  std::vector<double> out;
  out.reserve(steps * kNumFeatures);
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != kNumFeatures) {
      throw ParseError(fmt::format("prompt inputs: '{}' rows must have {} values", key,
                                   kNumFeatures));
    }
    for (const auto& v : row) out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

std::string_view to_string(PromptMode mode) {
  return mode == PromptMode::ZeroShot ? "zero_shot" : "few_shot";
}

PromptMode parse_prompt_mode(std::string_view text) {
  if (text == "zero" || text == "zero_shot") return PromptMode::ZeroShot;
  if (text == "few" || text == "few_shot") return PromptMode::FewShot;
  throw InvalidArgument(fmt::format("unknown prompt mode '{}'", text));
}

nlohmann::json to_json(const PromptInputs& in) {
  nlohmann::json stats = nlohmann::json::object();
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    stats[std::string(kFeatureNames[f])] = {in.stats.normal.mean[f], in.stats.normal.std[f],
                                            in.stats.attack.mean[f], in.stats.attack.std[f]};
  }
  return {{"stats", stats},
          {"steps", in.steps},
          {"window", matrix_json(in.window, in.steps)},
          {"predicted_label", in.predicted_label},
          {"lime", lime_terms_json(in.lime)},
          {"shap_local", matrix_json(in.shap_local, in.steps)},
          {"shap_global", matrix_json(in.shap_global, in.steps)}};
}

PromptInputs prompt_inputs_from_json(const nlohmann::json& j) {
  try {
    PromptInputs in;
    in.steps = j.at("steps").get<std::size_t>();
    const auto& stats = j.at("stats");
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      const auto& s = stats.at(std::string(kFeatureNames[f]));
      if (!s.is_array() || s.size() != 4) {
        throw ParseError(fmt::format("prompt inputs: stats.{} needs 4 values", kFeatureNames[f]));
      }
      in.stats.normal.mean[f] = s[0].get<double>();
      in.stats.normal.std[f] = s[1].get<double>();
      in.stats.attack.mean[f] = s[2].get<double>();
      in.stats.attack.std[f] = s[3].get<double>();
    }
    in.window = matrix_from_json(j.at("window"), in.steps, "window");
    in.predicted_label = j.at("predicted_label").get<int>();
    in.lime = lime_from_json(j.at("lime")).terms;
    in.shap_local = matrix_from_json(j.at("shap_local"), in.steps, "shap_local");
    in.shap_global = matrix_from_json(j.at("shap_global"), in.steps, "shap_global");
    return in;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("prompt inputs: {}", e.what()));
  }
}

PromptInputs load_prompt_inputs(const std::filesystem::path& path) {
  const auto text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return prompt_inputs_from_json(j);
}

std::vector<ChatMessage> PromptBundle::messages() const {
  std::vector<ChatMessage> out;
  out.push_back({"system", system_text});
  for (const auto& ex : exemplars) {
    out.push_back({"user", ex.user_text});
    out.push_back({"assistant", ex.assistant_text});
  }
  out.push_back({"user", user_text});
  return out;
}

std::string system_text(PromptMode mode) {
  return std::string(mode == PromptMode::ZeroShot ? kSystemZeroShot : kSystemFewShot);
}

std::string task_text(PromptMode mode) {
  return std::string(mode == PromptMode::ZeroShot ? kTaskZeroShot : kTaskFewShot);
}

std::string render_user_prompt(const PromptInputs& in, PromptMode mode) {
  check_shape(in);
  const bool zero = mode == PromptMode::ZeroShot;
  std::string out;
  out += "Normalized General Data Distribution (Feature Statistics):\n\n";
  out += render_stats_table(in.stats);
  out += fmt::format("\nInput Sequence to LSTM Model ({} timesteps × {} features):\n\n", in.steps,
                     kNumFeatures);
  out += render_timestep_table(in.steps, in.window);
  out += fmt::format("\nModel Prediction Output: {}\n\n",
                     in.predicted_label == 1 ? "1 (Anomalous)" : "0 (Normal)");
  out += zero ? "Local Explanation Table (LIME):\n\n" : "LIME Local Explanation:\n\n";
  out += render_lime_table(in.lime);
  out += "\nSHAP Local Heatmap:\n\n";
  out += render_timestep_table(in.steps, in.shap_local);
  out += "\nGlobal SHAP Feature Importance:\n\n";
  out += render_timestep_table(in.steps, in.shap_global);
  out += zero ? "\nTask for the LLM:\n" : "\nTask For LLM:\n";
  out += task_text(mode);
  out += "\n";
  return out;
}

PromptBundle render_prompt(const PromptInputs& in, PromptMode mode,
                           std::span<const Exemplar> exemplars) {
  PromptBundle b;
  b.mode = mode;
  b.system_text = system_text(mode);
  b.user_text = render_user_prompt(in, mode);
  if (mode == PromptMode::FewShot) {
    if (exemplars.empty()) throw InvalidArgument("few-shot prompt needs at least one exemplar");
    b.exemplars.assign(exemplars.begin(), exemplars.end());
  }
  return b;
}

std::vector<Exemplar> load_exemplars(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) {
    throw InvalidArgument(fmt::format("no exemplar manifest in {}", dir.string()));
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("{}: {}", manifest_path.string(), e.what()));
  }
  std::vector<Exemplar> out;
  for (const auto& entry : manifest.at("exemplars")) {
    const auto inputs = load_prompt_inputs(dir / entry.at("inputs").get<std::string>());
    out.push_back({render_user_prompt(inputs, PromptMode::FewShot),
                   read_file(dir / entry.at("response").get<std::string>())});
  }
  if (out.empty()) throw InvalidArgument(fmt::format("exemplar manifest in {} is empty", dir.string()));
  return out;
}

std::size_t estimate_tokens(std::string_view text) {
  std::size_t words = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = c == ' ' || c == '\n' || c == '\t' || c == '\r' || c == '\f' || c == '\v';
    if (!space && !in_word) ++words;
    in_word = !space;
  }
  // Integer form of ceil(words * 1.35), exact for every word count.
  return (words * 135 + 99) / 100;
}

std::size_t estimate_tokens(const PromptBundle& bundle) {
  std::size_t total = 0;
  for (const auto& m : bundle.messages()) total += estimate_tokens(m.content);
  return total;
}

nlohmann::json to_json(const PromptBundle& bundle) {
  auto messages = nlohmann::json::array();
  for (const auto& m : bundle.messages()) {
    messages.push_back({{"role", m.role}, {"content", m.content}});
  }
  return {{"mode", to_string(bundle.mode)}, {"system", bundle.system_text}, {"messages", messages}};
}

PromptBundle prompt_bundle_from_json(const nlohmann::json& j) {
  try {
    PromptBundle b;
    b.mode = parse_prompt_mode(j.value("mode", std::string("zero_shot")));
    b.system_text = j.at("system").get<std::string>();
    const auto& messages = j.at("messages");
    std::vector<ChatMessage> rest;
    for (const auto& m : messages) {
      rest.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
    }
    if (!rest.empty() && rest.front().role == "system") rest.erase(rest.begin());
    if (rest.empty() || rest.back().role != "user") {
      throw ParseError("prompt bundle: last message must be the user prompt");
    }
    b.user_text = rest.back().content;
    rest.pop_back();
    if (rest.size() % 2 != 0) throw ParseError("prompt bundle: unpaired exemplar message");
    for (std::size_t i = 0; i < rest.size(); i += 2) {
      if (rest[i].role != "user" || rest[i + 1].role != "assistant") {
        throw ParseError("prompt bundle: exemplars must be user/assistant pairs");
      }
      b.exemplars.push_back({rest[i].content, rest[i + 1].content});
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("prompt bundle: {}", e.what()));
  }
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", digest[i]);
  return out;
}

std::string bundle_digest(const PromptBundle& bundle) {
  return sha256_hex(to_json(bundle).dump());
}

}  // namespace sentinel
