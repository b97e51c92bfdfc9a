#include "sentinel/lime.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace sentinel {

std::string cell_name(std::size_t steps, std::size_t cell) {
  const std::size_t step = cell / kNumFeatures;
  const std::size_t feature = cell % kNumFeatures;
  return fmt::format("{}_t-{}", kFeatureNames[feature], steps - 1 - step);
}

double percentile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InvalidArgument("percentile of empty data");
  const double pos = q * double(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - double(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

std::size_t QuartileDiscretizer::bin_count(std::size_t cell) const {
  const auto& c = cells.at(cell);
  return c.constant ? 1 : c.edges.size() + 1;
}

std::size_t QuartileDiscretizer::bin_of(std::size_t cell, double value) const {
  const auto& c = cells.at(cell);
  if (c.constant) return 0;
  return std::size_t(std::lower_bound(c.edges.begin(), c.edges.end(), value) - c.edges.begin());
}

std::string QuartileDiscretizer::rule(std::size_t cell, std::size_t bin) const {
  const auto& c = cells.at(cell);
  const auto name = cell_name(steps, cell);
  if (c.constant) return fmt::format("{} = {:.2f}", name, c.constant_value);
  if (bin >= c.edges.size() + 1) throw InvalidArgument("rule: bin out of range");
  if (bin == 0) return fmt::format("{} ≤ {:.2f}", name, c.edges.front());
  if (bin == c.edges.size()) return fmt::format("{} > {:.2f}", name, c.edges.back());
  return fmt::format("{:.2f} < {} ≤ {:.2f}", c.edges[bin - 1], name, c.edges[bin]);
}

QuartileDiscretizer fit_discretizer(std::span<const Window> train) {
  if (train.empty()) throw InvalidArgument("fit_discretizer: empty training set");
  QuartileDiscretizer d;
  d.steps = train.front().steps;
  const std::size_t n_cells = d.steps * kNumFeatures;
  d.cells.resize(n_cells);
  std::vector<double> column(train.size());
  for (std::size_t cell = 0; cell < n_cells; ++cell) {
    for (std::size_t i = 0; i < train.size(); ++i) {
      if (train[i].values.size() != n_cells) {
        throw InvalidArgument("fit_discretizer: inconsistent window shapes");
      }
      column[i] = train[i].values[cell];
    }
    std::sort(column.begin(), column.end());
    auto& c = d.cells[cell];
    if (column.front() == column.back()) {
      c.constant = true;
      c.constant_value = column.front();
      c.freq = {1.0};
      c.mean = {column.front()};
      c.std = {0.0};
      c.min = {column.front()};
      c.max = {column.front()};
      continue;
    }
    for (double q : {0.25, 0.5, 0.75}) c.edges.push_back(percentile_sorted(column, q));
    c.edges.erase(std::unique(c.edges.begin(), c.edges.end()), c.edges.end());

    const std::size_t bins = c.edges.size() + 1;
    std::vector<double> sum(bins, 0.0), sq(bins, 0.0), count(bins, 0.0);
    c.min.assign(bins, std::numeric_limits<double>::infinity());
    c.max.assign(bins, -std::numeric_limits<double>::infinity());
    for (double v : column) {
      const std::size_t b = d.bin_of(cell, v);
      sum[b] += v;
      sq[b] += v * v;
      count[b] += 1.0;
      c.min[b] = std::min(c.min[b], v);
      c.max[b] = std::max(c.max[b], v);
    }
    for (std::size_t b = 0; b < bins; ++b) {
      c.freq.push_back(count[b] / double(column.size()));
      const double m = count[b] > 0 ? sum[b] / count[b] : 0.0;
      c.mean.push_back(m);
      c.std.push_back(count[b] > 0 ? std::sqrt(std::max(0.0, sq[b] / count[b] - m * m)) : 0.0);
      if (count[b] == 0) c.min[b] = c.max[b] = 0.0;
    }
  }
  return d;
}

nlohmann::json to_json(const QuartileDiscretizer& d) {
  auto cells = nlohmann::json::array();
  for (const auto& c : d.cells) {
    cells.push_back({{"edges", c.edges},
                     {"constant", c.constant},
                     {"constant_value", c.constant_value},
                     {"freq", c.freq},
                     {"mean", c.mean},
                     {"std", c.std},
                     {"min", c.min},
                     {"max", c.max}});
  }
  return {{"steps", d.steps}, {"cells", cells}};
}

QuartileDiscretizer discretizer_from_json(const nlohmann::json& j) {
  try {
    QuartileDiscretizer d;
    d.steps = j.at("steps").get<std::size_t>();
    for (const auto& c : j.at("cells")) {
      QuartileDiscretizer::Cell cell;
      c.at("edges").get_to(cell.edges);
      cell.constant = c.at("constant").get<bool>();
      cell.constant_value = c.at("constant_value").get<double>();
      c.at("freq").get_to(cell.freq);
      c.at("mean").get_to(cell.mean);
      c.at("std").get_to(cell.std);
      c.at("min").get_to(cell.min);
      c.at("max").get_to(cell.max);
      const std::size_t bins = cell.constant ? 1 : cell.edges.size() + 1;
      for (const auto* v : {&cell.freq, &cell.mean, &cell.std, &cell.min, &cell.max}) {
        if (v->size() != bins) throw ParseError("discretizer: bin statistics do not match edges");
      }
      d.cells.push_back(std::move(cell));
    }
    if (d.cells.size() != d.steps * kNumFeatures) {
      throw ParseError("discretizer: cell count does not match steps");
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("discretizer: {}", e.what()));
  }
}

namespace {

struct RidgeFit {
  Eigen::VectorXd coef;
  double intercept = 0.0;
};

// Weighted ridge with an unpenalized intercept, solved on weighted-centered
// columns.
RidgeFit weighted_ridge(const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& w, double lambda) {
  const double wsum = w.sum();
  const Eigen::RowVectorXd zmean = (w.transpose() * z) / wsum;
  const double ymean = w.dot(y) / wsum;
  const Eigen::MatrixXd zc = z.rowwise() - zmean;
  const Eigen::VectorXd yc = y.array() - ymean;
  Eigen::MatrixXd gram = zc.transpose() * w.asDiagonal() * zc;
  gram.diagonal().array() += lambda;
  const Eigen::VectorXd rhs = zc.transpose() * (w.array() * yc.array()).matrix();
  RidgeFit fit;
  fit.coef = gram.ldlt().solve(rhs);
  fit.intercept = ymean - zmean.dot(fit.coef);
  return fit;
}

double weighted_r2(const Eigen::VectorXd& y, const Eigen::VectorXd& pred,
                   const Eigen::VectorXd& w) {
  const double ymean = w.dot(y) / w.sum();
  const double ss_res = (w.array() * (y - pred).array().square()).sum();
  const double ss_tot = (w.array() * (y.array() - ymean).square()).sum();
  if (ss_tot <= 0.0) return ss_res <= 1e-24 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

}  // namespace

LimeExplanation explain_lime(const BatchModel& model, std::span<const double> window,
                             const QuartileDiscretizer& discretizer, const LimeConfig& config) {
  const std::size_t m = discretizer.cells.size();
  if (window.size() != m) throw InvalidArgument("explain_lime: window shape mismatch");
  if (config.n_samples < 50) throw InvalidArgument("insufficient perturbations");
  for (double v : window) {
    if (!std::isfinite(v)) throw InvalidArgument("explain_lime: non-finite input");
  }
  const std::size_t n = config.n_samples;
  const double width =
      config.kernel_width > 0.0 ? config.kernel_width : std::sqrt(double(m)) * 0.75;

  std::vector<std::size_t> own_bin(m);
  for (std::size_t c = 0; c < m; ++c) own_bin[c] = discretizer.bin_of(c, window[c]);

  // Row 0 is the instance itself.
  Eigen::MatrixXd z = Eigen::MatrixXd::Ones(Eigen::Index(n), Eigen::Index(m));
  std::vector<double> rows(n * m);
  std::copy(window.begin(), window.end(), rows.begin());

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::discrete_distribution<std::size_t>> bin_draw;
  bin_draw.reserve(m);
  for (const auto& c : discretizer.cells) bin_draw.emplace_back(c.freq.begin(), c.freq.end());

  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t c = 0; c < m; ++c) {
      const auto& cell = discretizer.cells[c];
      const std::size_t b = bin_draw[c](rng);
      double v = window[c];
      if (b != own_bin[c]) {
        z(Eigen::Index(i), Eigen::Index(c)) = 0.0;
        v = std::clamp(cell.mean[b] + cell.std[b] * gauss(rng), cell.min[b], cell.max[b]);
      }
      rows[i * m + c] = v;
    }
  }

  std::vector<double> out(n);
  model(rows, m, out);
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(out.data(), Eigen::Index(n));

  Eigen::VectorXd w = Eigen::VectorXd::Zero(Eigen::Index(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double d2 = double(m) - z.row(Eigen::Index(i)).sum();
    w(Eigen::Index(i)) = std::exp(-d2 / (width * width));
  }

  std::vector<std::size_t> selected(m);
  std::iota(selected.begin(), selected.end(), 0);
  RidgeFit fit = weighted_ridge(z, y, w, config.ridge);
  if (config.max_features > 0 && config.max_features < m) {
    std::stable_sort(selected.begin(), selected.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(fit.coef(Eigen::Index(a))) > std::abs(fit.coef(Eigen::Index(b)));
    });
    selected.resize(config.max_features);
    std::sort(selected.begin(), selected.end());
    Eigen::MatrixXd zs(z.rows(), Eigen::Index(selected.size()));
    for (std::size_t k = 0; k < selected.size(); ++k) {
      zs.col(Eigen::Index(k)) = z.col(Eigen::Index(selected[k]));
    }
    fit = weighted_ridge(zs, y, w, config.ridge);
    z = std::move(zs);
  }

  const Eigen::VectorXd pred = (z * fit.coef).array() + fit.intercept;
  LimeExplanation ex;
  ex.intercept = fit.intercept;
  ex.r2 = weighted_r2(y, pred, w);
  ex.kernel_width = width;
  ex.n_samples = n;
  ex.model_value = y(0);
  ex.local_prediction = pred(0);
  for (std::size_t k = 0; k < selected.size(); ++k) {
    const std::size_t c = selected[k];
    ex.terms.push_back({c, discretizer.rule(c, own_bin[c]), fit.coef(Eigen::Index(k))});
  }
  std::stable_sort(ex.terms.begin(), ex.terms.end(), [](const LimeTerm& a, const LimeTerm& b) {
    return std::abs(a.phi) > std::abs(b.phi);
  });
  return ex;
}

nlohmann::json lime_terms_json(std::span<const LimeTerm> terms) {
  auto arr = nlohmann::json::array();
  for (const auto& t : terms) arr.push_back({{"rule", t.rule}, {"phi", t.phi}});
  return arr;
}

nlohmann::json to_json(const LimeExplanation& ex) {
  return {{"terms", lime_terms_json(ex.terms)},
          {"intercept", ex.intercept},
          {"r2", ex.r2},
          {"kernel_width", ex.kernel_width},
          {"n_samples", ex.n_samples},
          {"model_value", ex.model_value},
          {"local_prediction", ex.local_prediction}};
}

LimeExplanation lime_from_json(const nlohmann::json& j) {
  LimeExplanation ex;
  const auto& terms = j.is_array() ? j : j.at("terms");
  for (const auto& t : terms) {
    ex.terms.push_back({kNoCell, t.at("rule").get<std::string>(), t.at("phi").get<double>()});
  }
  if (j.is_object()) {
    ex.intercept = j.value("intercept", 0.0);
    ex.r2 = j.value("r2", 0.0);
    ex.kernel_width = j.value("kernel_width", 0.0);
    ex.n_samples = j.value("n_samples", std::size_t{0});
    ex.model_value = j.value("model_value", 0.0);
    ex.local_prediction = j.value("local_prediction", 0.0);
  }
  return ex;
}

std::string render_lime_table(std::span<const LimeTerm> terms) {
  std::string out =
      "| Feature | Contrib. | Feature | Contrib. | Feature | Contrib. |\n"
      "|---|---:|---|---:|---|---:|\n";
  for (std::size_t i = 0; i < terms.size(); i += 3) {
    out += "|";
    for (std::size_t k = i; k < i + 3; ++k) {
      if (k < terms.size()) {
        out += fmt::format(" {} | {:.5f} |", terms[k].rule, terms[k].phi);
      } else {
        out += "  |  |";
      }
    }
    out += "\n";
  }
  return out;
}

}  // namespace sentinel
