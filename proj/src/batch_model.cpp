#include "sentinel/batch_model.hpp"

#include <vector>

namespace sentinel {

namespace {

void check_rows(std::span<const double> rows, std::size_t row_length, std::size_t n) {
  if (row_length == 0 || rows.size() != row_length * n) {
    throw InvalidArgument("batch model: shape mismatch");
  }
}

}  // namespace

BatchModel probability_model(const LstmParams& params, bool parallel) {
  if (parallel) {
    return [&params](std::span<const double> rows, std::size_t len, std::span<double> out) {
      predict_proba_rows(params, rows, len, out);
    };
  }
  return [&params](std::span<const double> rows, std::size_t len, std::span<double> out) {
    predict_proba_rows_serial(params, rows, len, out);
  };
}

BatchModel logit_model(const LstmParams& params, bool parallel) {
  return [&params, parallel](std::span<const double> rows, std::size_t len,
                             std::span<double> out) {
    check_rows(rows, len, out.size());
    const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static) if (parallel)
    for (std::ptrdiff_t r = 0; r < n; ++r) {
      out[std::size_t(r)] = predict_logit(params, rows.subspan(std::size_t(r) * len, len));
    }
  };
}

double evaluate_one(const BatchModel& model, std::span<const double> row) {
  double out = 0.0;
  model(row, row.size(), std::span<double>(&out, 1));
  return out;
}

}  // namespace sentinel
