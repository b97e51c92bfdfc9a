#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sentinel/batch_model.hpp"
#include "sentinel/kpm_data.hpp"

namespace sentinel {

/// Shapley kernel weight (M-1) / (C(M,s) s (M-s)) of one coalition of size
/// s out of M players; only defined for 0 < s < M.
double shapley_kernel_weight(std::size_t players, std::size_t size);

/// Reference inputs that replace the cells outside a coalition. With several
/// rows the masked output is averaged over them.
struct Background {
  std::vector<std::vector<double>> rows;
};

/// Per-cell mean of the windows.
Background mean_background(std::span<const Window> windows);

/// Attributions laid out as `steps` rows of `features` cells.
struct ShapExplanation {
  std::size_t steps = 0;
  std::size_t features = 0;
  std::vector<double> phi;
  double base_value = 0.0;   // model output on the background
  double model_value = 0.0;  // model output at the instance
  bool ridge_fallback = false;
  std::size_t coalitions = 0;  // distinct coalitions in the regression

  [[nodiscard]] double at(std::size_t step, std::size_t feature) const {
    return phi[step * features + feature];
  }
  /// |sum(phi) + base - f(x)|
  [[nodiscard]] double local_accuracy_gap() const;
};

inline constexpr std::size_t kMaxExactPlayers = 20;

/// Direct evaluation of the Shapley sum over all 2^M coalitions, M = x.size().
/// `features` only sets the layout of the result.
ShapExplanation exact_shapley(const BatchModel& model, std::span<const double> x,
                              const Background& background,
                              std::size_t features = kNumFeatures);

struct ShapConfig {
  std::size_t n_coalitions = 2048;
  bool full_enumeration = false;  // use all 2^M - 2 coalitions with exact weights
  std::uint64_t seed = 0;
};

/// Kernel SHAP: weighted least squares over sampled coalitions (each drawn
/// together with its complement) with sum(phi) = f(x) - base enforced exactly.
ShapExplanation explain_kernel_shap(const BatchModel& model, std::span<const double> x,
                                    const Background& background, const ShapConfig& config,
                                    std::size_t features = kNumFeatures);

struct GlobalImportance {
  std::size_t steps = 0;
  std::size_t features = 0;
  std::vector<double> phi;  // mean |phi| per cell
  std::size_t count = 0;

  [[nodiscard]] double at(std::size_t step, std::size_t feature) const {
    return phi[step * features + feature];
  }
};

GlobalImportance global_importance(std::span<const ShapExplanation> explanations);

nlohmann::json to_json(const ShapExplanation& explanation);
nlohmann::json to_json(const GlobalImportance& importance);
/// Accepts the output of either to_json overload (only the shared fields).
ShapExplanation shap_from_json(const nlohmann::json& j);
GlobalImportance global_from_json(const nlohmann::json& j);

/// Markdown table with one row per timestep (T0 = oldest) and one column per
/// KPM feature, 5 decimals.
std::string render_timestep_table(std::size_t steps, std::span<const double> values);

}  // namespace sentinel
