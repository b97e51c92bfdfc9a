#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sentinel/batch_model.hpp"
#include "sentinel/kpm_data.hpp"

namespace sentinel {

/// Name of flattened cell `cell` of a window with `steps` rows, e.g.
/// "ul_bitrate_t-0" for the last row.
std::string cell_name(std::size_t steps, std::size_t cell);

/// Quartile bins of every flattened (timestep, feature) cell.
struct QuartileDiscretizer {
  struct Cell {
    std::vector<double> edges;  // distinct, ascending
    bool constant = false;      // single bin, rendered "x = c"
    double constant_value = 0.0;
    // Training statistics of every bin, used to draw perturbed values.
    std::vector<double> freq;
    std::vector<double> mean;
    std::vector<double> std;
    std::vector<double> min;
    std::vector<double> max;
  };

  std::size_t steps = 0;
  std::vector<Cell> cells;  // steps * 14, row-major

  [[nodiscard]] std::size_t bin_count(std::size_t cell) const;
  [[nodiscard]] std::size_t bin_of(std::size_t cell, double value) const;
  /// "x ≤ a", "a < x ≤ b" or "x > c" with 2 decimals.
  [[nodiscard]] std::string rule(std::size_t cell, std::size_t bin) const;
};

/// numpy-style linear-interpolated percentile of sorted data, q in [0,1].
double percentile_sorted(std::span<const double> sorted, double q);

QuartileDiscretizer fit_discretizer(std::span<const Window> train);

nlohmann::json to_json(const QuartileDiscretizer& discretizer);
QuartileDiscretizer discretizer_from_json(const nlohmann::json& j);

struct LimeConfig {
  std::size_t n_samples = 5000;
  double kernel_width = 0.0;  // 0: sqrt(cells) * 0.75
  double ridge = 1e-3;
  std::size_t max_features = 0;  // 0: keep every cell
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kNoCell = std::numeric_limits<std::size_t>::max();

struct LimeTerm {
  std::size_t cell = kNoCell;
  std::string rule;
  double phi = 0.0;
};

struct LimeExplanation {
  std::vector<LimeTerm> terms;  // sorted by |phi|, descending
  double intercept = 0.0;
  double r2 = 0.0;               // kernel-weighted, on the perturbation set
  double kernel_width = 0.0;
  std::size_t n_samples = 0;
  double model_value = 0.0;      // model output at the instance
  double local_prediction = 0.0; // surrogate at the instance (all bins kept)
};

/// Local surrogate around `window` in bin space. Perturbation i keeps or
/// resamples each cell's bin from the training marginals; a kept bin keeps
/// the original value. Samples are weighted by exp(-d^2 / width^2) where d is
/// the Euclidean distance between binary keep-vectors, and a weighted ridge
/// with an unpenalized intercept is fit to the model output.
LimeExplanation explain_lime(const BatchModel& model, std::span<const double> window,
                             const QuartileDiscretizer& discretizer, const LimeConfig& config);

nlohmann::json lime_terms_json(std::span<const LimeTerm> terms);
nlohmann::json to_json(const LimeExplanation& explanation);
LimeExplanation lime_from_json(const nlohmann::json& j);

/// Three (rule, contribution) pairs per row, terms in row-major order.
std::string render_lime_table(std::span<const LimeTerm> terms);

}  // namespace sentinel
