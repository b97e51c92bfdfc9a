#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace sentinel {

inline constexpr int kReportSchemaVersion = 1;

/// Validates `doc` against the JSON Schema subset used by the shipped schemas:
/// type (name or list), enum, const, required, properties,
/// additionalProperties (boolean or schema), items, minItems, maxItems,
/// minimum, maximum and minLength. Returns one message per violation, each
/// prefixed by the JSON pointer of the offending value.
std::vector<std::string> validate_json(const nlohmann::json& schema, const nlohmann::json& doc);

nlohmann::json load_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

/// Markdown rendering of an insight report: prediction, top LIME terms,
/// SHAP table, readability and the LLM insight text.
std::string render_report_markdown(const nlohmann::json& report);

}  // namespace sentinel
