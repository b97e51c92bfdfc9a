#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "sentinel/lstm.hpp"

namespace sentinel {

/// Black-box scorer used by the explainers: `rows` holds `out.size()`
/// flattened inputs of `row_length` values each, back to back.
using BatchModel = std::function<void(std::span<const double> rows, std::size_t row_length,
                                      std::span<double> out)>;

/// Class-1 probability of the detector; `params` must outlive the model.
/// The parallel variant runs rows on the OpenMP pool and returns the same
/// values as the serial one.
BatchModel probability_model(const LstmParams& params, bool parallel = true);

/// Head pre-activation (logit) of the detector.
BatchModel logit_model(const LstmParams& params, bool parallel = true);

double evaluate_one(const BatchModel& model, std::span<const double> row);

}  // namespace sentinel
