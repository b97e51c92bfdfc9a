#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "sentinel/batch_model.hpp"
#include "sentinel/lstm.hpp"
#include "sentinel/shap.hpp"

using namespace sentinel;

namespace {

constexpr std::size_t kSteps = 3;
constexpr std::size_t kRow = kSteps * kNumFeatures;

std::vector<Window> random_windows(std::size_t n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Window> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].steps = kSteps;
    out[i].label = int(i % 2);
    out[i].values.resize(kRow);
    for (auto& v : out[i].values) v = u(rng);
  }
  return out;
}

std::vector<double> flatten(const std::vector<Window>& windows) {
  std::vector<double> rows;
  for (const auto& w : windows) rows.insert(rows.end(), w.values.begin(), w.values.end());
  return rows;
}

void BM_PredictRows(benchmark::State& state, bool parallel) {
  const auto params = init_model(3, kNumFeatures, 32);
  const auto rows = flatten(random_windows(std::size_t(state.range(0))));
  std::vector<double> out(std::size_t(state.range(0)));
  for (auto _ : state) {
    if (parallel) {
      predict_proba_rows(params, rows, kRow, out);
    } else {
      predict_proba_rows_serial(params, rows, kRow, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_LossGradient(benchmark::State& state, bool parallel) {
  const auto params = init_model(3, kNumFeatures, 32);
  const auto windows = random_windows(std::size_t(state.range(0)));
  std::vector<std::size_t> idx(windows.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (auto _ : state) {
    auto r = parallel ? loss_and_gradient(params, windows, idx)
                      : loss_and_gradient_serial(params, windows, idx);
    benchmark::DoNotOptimize(r.loss);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_KernelShap(benchmark::State& state, bool parallel) {
  const auto params = init_model(3, kNumFeatures, 32);
  const auto windows = random_windows(64);
  const auto model = probability_model(params, parallel);
  const auto background = mean_background(windows);
  ShapConfig cfg;
  cfg.n_coalitions = std::size_t(state.range(0));
  for (auto _ : state) {
    auto e = explain_kernel_shap(model, windows[0].values, background, cfg);
    benchmark::DoNotOptimize(e.phi.data());
  }
}

void BM_SingleWindowForward(benchmark::State& state) {
  const auto params = init_model(3, kNumFeatures, 32);
  const auto windows = random_windows(1);
  for (auto _ : state) benchmark::DoNotOptimize(predict_proba(params, windows[0].values));
}

}  // namespace

BENCHMARK_CAPTURE(BM_PredictRows, serial, false)->Arg(256)->Arg(4096);
BENCHMARK_CAPTURE(BM_PredictRows, openmp, true)->Arg(256)->Arg(4096);
BENCHMARK_CAPTURE(BM_LossGradient, serial, false)->Arg(64)->Arg(1024);
BENCHMARK_CAPTURE(BM_LossGradient, openmp, true)->Arg(64)->Arg(1024);
BENCHMARK_CAPTURE(BM_KernelShap, serial, false)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_KernelShap, openmp, true)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SingleWindowForward);

BENCHMARK_MAIN();
