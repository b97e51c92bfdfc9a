#include "sentinel/report.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "sentinel/error.hpp"
#include "sentinel/lime.hpp"
#include "sentinel/shap.hpp"

namespace sentinel {

namespace {

bool has_type(const nlohmann::json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  if (type == "number") return v.is_number();
  if (type == "integer") {
    if (v.is_number_integer()) return true;
    if (v.is_number_float()) {
      const double d = v.get<double>();
      return std::isfinite(d) && d == std::floor(d);
    }
    return false;
  }
  throw InvalidArgument(fmt::format("schema: unsupported type '{}'", type));
}

std::string escape_pointer(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out += c;
    }
  }
  return out;
}

void validate(const nlohmann::json& schema, const nlohmann::json& v, const std::string& path,
              std::vector<std::string>& errors) {
  if (schema.is_boolean()) {
    if (!schema.get<bool>()) errors.push_back(fmt::format("{}: not allowed", path));
    return;
  }
  if (!schema.is_object()) throw InvalidArgument("schema: node must be an object or boolean");
  const std::string where = path.empty() ? "/" : path;

  if (auto it = schema.find("type"); it != schema.end()) {
    bool ok = false;
    if (it->is_string()) {
      ok = has_type(v, it->get<std::string>());
    } else {
      for (const auto& t : *it) ok = ok || has_type(v, t.get<std::string>());
    }
    if (!ok) {
      errors.push_back(fmt::format("{}: expected type {}, got {}", where, it->dump(), v.type_name()));
      return;
    }
  }
  if (auto it = schema.find("const"); it != schema.end() && *it != v) {
    errors.push_back(fmt::format("{}: must equal {}", where, it->dump()));
  }
  if (auto it = schema.find("enum"); it != schema.end()) {
    bool found = false;
    for (const auto& e : *it) found = found || e == v;
    if (!found) errors.push_back(fmt::format("{}: {} not in {}", where, v.dump(), it->dump()));
  }
  if (v.is_number()) {
    const double d = v.get<double>();
    if (auto it = schema.find("minimum"); it != schema.end() && d < it->get<double>()) {
      errors.push_back(fmt::format("{}: {} is below minimum {}", where, d, it->get<double>()));
    }
    if (auto it = schema.find("maximum"); it != schema.end() && d > it->get<double>()) {
      errors.push_back(fmt::format("{}: {} is above maximum {}", where, d, it->get<double>()));
    }
  }
  if (v.is_string()) {
    if (auto it = schema.find("minLength"); it != schema.end() &&
                                            v.get<std::string>().size() < it->get<std::size_t>()) {
      errors.push_back(fmt::format("{}: string shorter than {}", where, it->get<std::size_t>()));
    }
  }
  if (v.is_array()) {
    if (auto it = schema.find("minItems"); it != schema.end() && v.size() < it->get<std::size_t>()) {
      errors.push_back(fmt::format("{}: fewer than {} items", where, it->get<std::size_t>()));
    }
    if (auto it = schema.find("maxItems"); it != schema.end() && v.size() > it->get<std::size_t>()) {
      errors.push_back(fmt::format("{}: more than {} items", where, it->get<std::size_t>()));
    }
    if (auto it = schema.find("items"); it != schema.end()) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        validate(*it, v[i], fmt::format("{}/{}", path, i), errors);
      }
    }
  }
  if (v.is_object()) {
    if (auto it = schema.find("required"); it != schema.end()) {
      for (const auto& key : *it) {
        if (!v.contains(key.get<std::string>())) {
          errors.push_back(fmt::format("{}: missing required property '{}'", where,
                                       key.get<std::string>()));
        }
      }
    }
    const auto props = schema.find("properties");
    const auto extra = schema.find("additionalProperties");
    for (const auto& [key, value] : v.items()) {
      const std::string child = path + "/" + escape_pointer(key);
      if (props != schema.end() && props->contains(key)) {
        validate((*props)[key], value, child, errors);
      } else if (extra != schema.end()) {
        validate(*extra, value, child, errors);
      }
    }
  }
}

}  // namespace

std::vector<std::string> validate_json(const nlohmann::json& schema, const nlohmann::json& doc) {
  std::vector<std::string> errors;
  validate(schema, doc, "", errors);
  return errors;
}

nlohmann::json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument(fmt::format("cannot write {}", path.string()));
  out << doc.dump(2) << "\n";
}

std::string render_report_markdown(const nlohmann::json& r) {
  try {
    const auto& w = r.at("window");
    const auto& p = r.at("prediction");
    std::string out = fmt::format("# Insight report: window {}\n\n", w.at("window_id").get<long long>());
    out += fmt::format("- UE: {}\n- Day: {}\n- Window start: {}\n", w.at("ue_id").get<std::string>(),
                       w.at("day").get<int>(), w.at("start_timestamp").get<long long>());
    const int label = p.at("label").get<int>();
    out += fmt::format("- Prediction: {} (p = {:.5f})\n", label == 1 ? "1 (Anomalous)" : "0 (Normal)",
                       p.at("probability").get<double>());
    if (p.contains("true_label") && !p["true_label"].is_null()) {
      out += fmt::format("- True label: {}\n", p["true_label"].get<int>());
    }

    const auto lime = lime_from_json(r.at("lime"));
    const std::size_t top = std::min<std::size_t>(lime.terms.size(), 9);
    out += fmt::format("\n## LIME (top {}, weighted R² {:.3f})\n\n", top, lime.r2);
    out += render_lime_table(std::span<const LimeTerm>(lime.terms).first(top));

    const auto shap = shap_from_json(r.at("shap"));
    out += fmt::format("\n## SHAP local (base {:.5f})\n\n", shap.base_value);
    out += render_timestep_table(shap.steps, shap.phi);

    out += "\n## Insight\n\n";
    if (r.at("insight").is_null()) {
      const bool has_error = r.contains("error") && r["error"].is_string();
      out += fmt::format("_No insight: {}_\n",
                         has_error ? r["error"].get<std::string>() : std::string("unknown error"));
    } else {
      const auto& in = r["insight"];
      out += fmt::format("_{} / {}_\n\n", in.at("provider").get<std::string>(),
                         in.at("model").get<std::string>());
      out += in.at("text").get<std::string>();
      if (out.back() != '\n') out += "\n";
    }
    if (r.contains("readability") && !r["readability"].is_null()) {
      const auto& rd = r["readability"];
      out += fmt::format("\n## Readability\n\n- Flesch Reading Ease: {:.2f}\n- Gunning Fog: {:.2f} ({})\n",
                         rd.at("flesch_reading_ease").get<double>(), rd.at("gunning_fog").get<double>(),
                         rd.at("fog_grade").get<std::string>());
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("report: {}", e.what()));
  }
}

}  // namespace sentinel
