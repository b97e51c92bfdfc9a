#include "sentinel/shap.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace sentinel {

namespace {

double binomial(std::size_t n, std::size_t k) {
  k = std::min(k, n - k);
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * double(n - k + i) / double(i);
  return r;
}

void check_inputs(std::span<const double> x, const Background& bg, std::size_t features) {
  if (x.empty()) throw InvalidArgument("shap: empty input");
  if (features == 0 || x.size() % features != 0) {
    throw InvalidArgument("shap: input length is not a multiple of the feature count");
  }
  if (bg.rows.empty()) throw InvalidArgument("shap: empty background");
  for (const auto& r : bg.rows) {
    if (r.size() != x.size()) throw InvalidArgument("shap: background shape mismatch");
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw InvalidArgument("shap: non-finite input");
  }
}

// Masked value v(S) for a batch of coalitions: cells in S come from x, the
// rest from each background row; outputs are averaged over the background.
class MaskedEvaluator {
 public:
  MaskedEvaluator(const BatchModel& model, std::span<const double> x, const Background& bg)
      : model_(model), x_(x), bg_(bg) {}

  template <typename InCoalition>
  std::vector<double> evaluate(std::size_t count, InCoalition in_coalition) const {
    const std::size_t m = x_.size();
    const std::size_t nb = bg_.rows.size();
    std::vector<double> values(count, 0.0);
    constexpr std::size_t kChunk = 8192;
    std::vector<double> rows;
    std::vector<double> out;
    for (std::size_t begin = 0; begin < count; begin += kChunk) {
      const std::size_t end = std::min(count, begin + kChunk);
      rows.resize((end - begin) * nb * m);
      out.resize((end - begin) * nb);
      for (std::size_t k = begin; k < end; ++k) {
        for (std::size_t b = 0; b < nb; ++b) {
          double* row = rows.data() + ((k - begin) * nb + b) * m;
          for (std::size_t j = 0; j < m; ++j) row[j] = in_coalition(k, j) ? x_[j] : bg_.rows[b][j];
        }
      }
      model_(rows, m, out);
      for (std::size_t k = begin; k < end; ++k) {
        double sum = 0.0;
        for (std::size_t b = 0; b < nb; ++b) sum += out[(k - begin) * nb + b];
        values[k] = sum / double(nb);
      }
    }
    return values;
  }

  double full() const {
    return evaluate(1, [](std::size_t, std::size_t) { return true; })[0];
  }
  double empty() const {
    return evaluate(1, [](std::size_t, std::size_t) { return false; })[0];
  }

 private:
  const BatchModel& model_;
  std::span<const double> x_;
  const Background& bg_;
};

ShapExplanation make_result(std::size_t m, std::size_t features) {
  ShapExplanation ex;
  ex.features = features;
  ex.steps = m / features;
  ex.phi.assign(m, 0.0);
  return ex;
}

}  // namespace

double shapley_kernel_weight(std::size_t players, std::size_t size) {
  if (size == 0 || size >= players) {
    throw InvalidArgument("shapley_kernel_weight: coalition size must be in (0, M)");
  }
  return double(players - 1) /
         (binomial(players, size) * double(size) * double(players - size));
}

Background mean_background(std::span<const Window> windows) {
  if (windows.empty()) throw InvalidArgument("mean_background: no windows");
  std::vector<double> mean(windows.front().values.size(), 0.0);
  for (const auto& w : windows) {
    if (w.values.size() != mean.size()) throw InvalidArgument("mean_background: shape mismatch");
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += w.values[j];
  }
  for (auto& v : mean) v /= double(windows.size());
  return Background{{std::move(mean)}};
}

double ShapExplanation::local_accuracy_gap() const {
  const double total = std::accumulate(phi.begin(), phi.end(), 0.0);
  return std::abs(total + base_value - model_value);
}

ShapExplanation exact_shapley(const BatchModel& model, std::span<const double> x,
                              const Background& background, std::size_t features) {
  check_inputs(x, background, features);
  const std::size_t m = x.size();
  if (m > kMaxExactPlayers) {
    throw InvalidArgument(
        fmt::format("exact_shapley: {} players exceeds the limit of {}", m, kMaxExactPlayers));
  }
  const std::size_t subsets = std::size_t{1} << m;
  MaskedEvaluator eval(model, x, background);
  const auto v = eval.evaluate(subsets, [](std::size_t mask, std::size_t j) {
    return ((mask >> j) & 1U) != 0;
  });

  // s! (M-s-1)! / M! = 1 / (M * C(M-1, s))
  std::vector<double> coef(m);
  for (std::size_t s = 0; s < m; ++s) coef[s] = 1.0 / (double(m) * binomial(m - 1, s));

  auto ex = make_result(m, features);
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    const auto s = std::size_t(std::popcount(mask));
    for (std::size_t i = 0; i < m; ++i) {
      if ((mask >> i) & 1U) continue;
      ex.phi[i] += coef[s] * (v[mask | (std::size_t{1} << i)] - v[mask]);
    }
  }
  ex.base_value = v[0];
  ex.model_value = v[subsets - 1];
  ex.coalitions = subsets;
  return ex;
}

ShapExplanation explain_kernel_shap(const BatchModel& model, std::span<const double> x,
                                    const Background& background, const ShapConfig& config,
                                    std::size_t features) {
  check_inputs(x, background, features);
  const std::size_t m = x.size();
  if (m > 64) throw InvalidArgument("explain_kernel_shap: at most 64 players are supported");
  MaskedEvaluator eval(model, x, background);
  auto ex = make_result(m, features);
  ex.model_value = eval.full();
  ex.base_value = eval.empty();
  const double delta = ex.model_value - ex.base_value;
  if (m == 1) {
    ex.phi[0] = delta;
    return ex;
  }

  const std::uint64_t all = m == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << m) - 1;
  // coalition mask -> regression weight
  std::map<std::uint64_t, double> weights;
  if (config.full_enumeration) {
    if (m > kMaxExactPlayers) {
      throw InvalidArgument("explain_kernel_shap: full enumeration needs M <= 20");
    }
    for (std::uint64_t mask = 1; mask < all; ++mask) {
      weights[mask] = shapley_kernel_weight(m, std::size_t(std::popcount(mask)));
    }
  } else {
    if (config.n_coalitions < 2 * m) {
      throw InvalidArgument("explain_kernel_shap: n_coalitions must be >= 2M");
    }
    // Size s is drawn with probability proportional to (M-1)/(s(M-s)), which
    // makes every coalition's draw probability proportional to its kernel
    // weight; sampled coalitions then enter the regression with their counts.
    std::vector<double> size_weight(m - 1);
    for (std::size_t s = 1; s < m; ++s) size_weight[s - 1] = 1.0 / double(s * (m - s));
    std::discrete_distribution<std::size_t> size_draw(size_weight.begin(), size_weight.end());
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> idx(m);
    for (std::size_t pair = 0; pair < config.n_coalitions / 2; ++pair) {
      const std::size_t s = size_draw(rng) + 1;
      std::iota(idx.begin(), idx.end(), 0);
      std::uint64_t mask = 0;
      for (std::size_t k = 0; k < s; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, m - 1);
        std::swap(idx[k], idx[pick(rng)]);
        mask |= std::uint64_t{1} << idx[k];
      }
      weights[mask] += 1.0;
      weights[all & ~mask] += 1.0;
    }
  }

  std::vector<std::uint64_t> masks;
  masks.reserve(weights.size());
  for (const auto& [mask, w] : weights) masks.push_back(mask);
  const auto v = eval.evaluate(masks.size(), [&](std::size_t k, std::size_t j) {
    return ((masks[k] >> j) & 1U) != 0;
  });
  ex.coalitions = masks.size();

  // The last player is eliminated through sum(phi) = delta.
  const std::size_t p = m - 1;
  const auto n = Eigen::Index(masks.size());
  Eigen::MatrixXd a(n, Eigen::Index(p));
  Eigen::VectorXd b(n);
  Eigen::VectorXd w(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto mask = masks[std::size_t(k)];
    const double z_last = double((mask >> p) & 1U);
    for (std::size_t j = 0; j < p; ++j) {
      a(k, Eigen::Index(j)) = double((mask >> j) & 1U) - z_last;
    }
    b(k) = v[std::size_t(k)] - ex.base_value - z_last * delta;
    w(k) = weights[mask];
  }
  Eigen::MatrixXd gram = a.transpose() * w.asDiagonal() * a;
  const Eigen::VectorXd rhs = a.transpose() * (w.array() * b.array()).matrix();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const double max_ev = eig.eigenvalues().maxCoeff();
  const double min_ev = eig.eigenvalues().minCoeff();
  if (!(max_ev > 0.0) || min_ev <= 1e-12 * max_ev) {
    ex.ridge_fallback = true;
    gram.diagonal().array() += 1e-6;
  }
  const Eigen::VectorXd beta = gram.ldlt().solve(rhs);
  double rest = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    ex.phi[j] = beta(Eigen::Index(j));
    rest += ex.phi[j];
  }
  ex.phi[p] = delta - rest;
  return ex;
}

GlobalImportance global_importance(std::span<const ShapExplanation> explanations) {
  if (explanations.empty()) throw InvalidArgument("global_importance: no explanations");
  GlobalImportance g;
  g.steps = explanations.front().steps;
  g.features = explanations.front().features;
  g.phi.assign(explanations.front().phi.size(), 0.0);
  for (const auto& e : explanations) {
    if (e.steps != g.steps || e.features != g.features || e.phi.size() != g.phi.size()) {
      throw InvalidArgument("global_importance: shape mismatch");
    }
    for (std::size_t j = 0; j < g.phi.size(); ++j) g.phi[j] += std::abs(e.phi[j]);
  }
  for (auto& v : g.phi) v /= double(explanations.size());
  g.count = explanations.size();
  return g;
}

namespace {

nlohmann::json matrix_json(std::size_t steps, std::size_t features,
                           std::span<const double> values) {
  auto rows = nlohmann::json::array();
  for (std::size_t t = 0; t < steps; ++t) {
    rows.push_back(std::vector<double>(values.begin() + std::ptrdiff_t(t * features),
                                       values.begin() + std::ptrdiff_t((t + 1) * features)));
  }
  return rows;
}

nlohmann::json axis_labels(std::size_t steps, std::size_t features) {
  std::vector<std::string> timesteps;
  for (std::size_t t = 0; t < steps; ++t) timesteps.push_back(fmt::format("T{}", t));
  std::vector<std::string> names;
  for (std::size_t f = 0; f < features; ++f) {
    names.push_back(features == kNumFeatures ? std::string(kFeatureNames[f])
                                             : fmt::format("x{}", f));
  }
  return {{"timesteps", timesteps}, {"features", names}};
}

std::vector<double> flatten_matrix(const nlohmann::json& rows, std::size_t& steps,
                                   std::size_t& features) {
  std::vector<double> out;
  steps = rows.size();
  features = steps ? rows.at(0).size() : 0;
  for (const auto& r : rows) {
    if (r.size() != features) throw ParseError("ragged attribution matrix");
    for (const auto& v : r) out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

nlohmann::json to_json(const ShapExplanation& ex) {
  auto j = axis_labels(ex.steps, ex.features);
  j["base"] = ex.base_value;
  j["phi"] = matrix_json(ex.steps, ex.features, ex.phi);
  j["model_value"] = ex.model_value;
  j["ridge_fallback"] = ex.ridge_fallback;
  j["coalitions"] = ex.coalitions;
  return j;
}

nlohmann::json to_json(const GlobalImportance& g) {
  auto j = axis_labels(g.steps, g.features);
  j["phi"] = matrix_json(g.steps, g.features, g.phi);
  j["count"] = g.count;
  return j;
}

ShapExplanation shap_from_json(const nlohmann::json& j) {
  ShapExplanation ex;
  ex.phi = flatten_matrix(j.at("phi"), ex.steps, ex.features);
  ex.base_value = j.value("base", 0.0);
  ex.model_value = j.value("model_value", 0.0);
  ex.ridge_fallback = j.value("ridge_fallback", false);
  ex.coalitions = j.value("coalitions", std::size_t{0});
  return ex;
}

GlobalImportance global_from_json(const nlohmann::json& j) {
  GlobalImportance g;
  g.phi = flatten_matrix(j.at("phi"), g.steps, g.features);
  g.count = j.value("count", std::size_t{0});
  return g;
}

std::string render_timestep_table(std::size_t steps, std::span<const double> values) {
  if (values.size() != steps * kNumFeatures) {
    throw InvalidArgument("render_timestep_table: expected steps x 14 values");
  }
  std::string out = "| Timestep |";
  for (auto name : kFeatureNames) out += fmt::format(" {} |", name);
  out += "\n|---|";
  for (std::size_t f = 0; f < kNumFeatures; ++f) out += "---:|";
  out += "\n";
  for (std::size_t t = 0; t < steps; ++t) {
    out += fmt::format("| T{} |", t);
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      out += fmt::format(" {:.5f} |", values[t * kNumFeatures + f]);
    }
    out += "\n";
  }
  return out;
}

}  // namespace sentinel
