#include "sentinel/lstm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include <fmt/format.h>

namespace sentinel {

namespace {

constexpr double kProbabilityClip = 1e-12;
constexpr std::size_t kGradientChunk = 8;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Activations of one forward pass, kept for BPTT.
struct Trace {
  std::size_t steps = 0;
  std::size_t hidden = 0;
  std::vector<double> gates;   // steps x 4H: i, f, g, o after activation
  std::vector<double> cell;    // steps x H
  std::vector<double> tanh_c;  // steps x H
  std::vector<double> state;   // steps x H (hidden output h_t)
  double logit = 0.0;

  void resize(std::size_t s, std::size_t h) {
    steps = s;
    hidden = h;
    gates.resize(s * kNumGates * h);
    cell.resize(s * h);
    tanh_c.resize(s * h);
    state.resize(s * h);
  }
};

void check_sequence(const LstmParams& params, std::span<const double> sequence) {
  if (sequence.empty() || sequence.size() % params.input_dim() != 0) {
    throw InvalidArgument(fmt::format("sequence length {} is not a multiple of input_dim {}",
                                      sequence.size(), params.input_dim()));
  }
  for (double v : sequence) {
    if (!std::isfinite(v)) throw InvalidArgument("non-finite input to forward");
  }
}

void forward_trace(const LstmParams& p, std::span<const double> seq, Trace& tr) {
  const std::size_t D = p.input_dim();
  const std::size_t H = p.hidden();
  const std::size_t steps = seq.size() / D;
  tr.resize(steps, H);

  for (std::size_t t = 0; t < steps; ++t) {
    const double* x = seq.data() + t * D;
    const double* h_prev = t > 0 ? tr.state.data() + (t - 1) * H : nullptr;
    const double* c_prev = t > 0 ? tr.cell.data() + (t - 1) * H : nullptr;
    double* act = tr.gates.data() + t * kNumGates * H;

    for (std::size_t g = 0; g < kNumGates; ++g) {
      const Gate gate = static_cast<Gate>(g);
      double* z = act + g * H;
      const auto b = p.bias(gate);
      std::copy(b.begin(), b.end(), z);
      const double* wx = p.input_weights(gate).data();
      for (std::size_t k = 0; k < D; ++k) {
        const double xk = x[k];
        if (xk == 0.0) continue;
        const double* row = wx + k * H;
        for (std::size_t j = 0; j < H; ++j) z[j] += xk * row[j];
      }
      if (h_prev != nullptr) {
        const double* wh = p.recurrent_weights(gate).data();
        for (std::size_t k = 0; k < H; ++k) {
          const double hk = h_prev[k];
          const double* row = wh + k * H;
          for (std::size_t j = 0; j < H; ++j) z[j] += hk * row[j];
        }
      }
    }

    double* gi = act;
    double* gf = act + H;
    double* gg = act + 2 * H;
    double* go = act + 3 * H;
    double* c = tr.cell.data() + t * H;
    double* tc = tr.tanh_c.data() + t * H;
    double* h = tr.state.data() + t * H;
    for (std::size_t j = 0; j < H; ++j) {
      gi[j] = sigmoid(gi[j]);
      gf[j] = sigmoid(gf[j]);
      gg[j] = std::tanh(gg[j]);
      go[j] = sigmoid(go[j]);
      c[j] = gi[j] * gg[j] + (c_prev != nullptr ? gf[j] * c_prev[j] : 0.0);
      tc[j] = std::tanh(c[j]);
      h[j] = go[j] * tc[j];
    }
  }

  const double* h_last = tr.state.data() + (steps - 1) * H;
  const auto w = p.head_weights();
  double logit = p.head_bias();
  for (std::size_t j = 0; j < H; ++j) logit += w[j] * h_last[j];
  tr.logit = logit;
}

/// Accumulates d(loss)/d(params) for one sequence given d(loss)/d(logit).
void backward_trace(const LstmParams& p, std::span<const double> seq, const Trace& tr,
                    double dlogit, LstmGradients& grad, std::vector<double>& scratch) {
  const std::size_t D = p.input_dim();
  const std::size_t H = p.hidden();
  const std::size_t steps = tr.steps;

  scratch.assign(4 * H + 3 * H, 0.0);
  double* dz = scratch.data();           // 4H pre-activation gradients
  double* dh = scratch.data() + 4 * H;   // H
  double* dc = dh + H;                   // H
  double* dh_prev = dc + H;              // H

  const double* h_last = tr.state.data() + (steps - 1) * H;
  auto gw = grad.head_weights();
  const auto w = p.head_weights();
  for (std::size_t j = 0; j < H; ++j) {
    gw[j] += dlogit * h_last[j];
    dh[j] = dlogit * w[j];
  }
  grad.head_bias() += dlogit;

  for (std::size_t t = steps; t-- > 0;) {
    const double* x = seq.data() + t * D;
    const double* act = tr.gates.data() + t * kNumGates * H;
    const double* gi = act;
    const double* gf = act + H;
    const double* gg = act + 2 * H;
    const double* go = act + 3 * H;
    const double* tc = tr.tanh_c.data() + t * H;
    const double* c_prev = t > 0 ? tr.cell.data() + (t - 1) * H : nullptr;
    const double* h_prev = t > 0 ? tr.state.data() + (t - 1) * H : nullptr;

    for (std::size_t j = 0; j < H; ++j) {
      const double d_o = dh[j] * tc[j];
      dc[j] += dh[j] * go[j] * (1.0 - tc[j] * tc[j]);
      const double d_i = dc[j] * gg[j];
      const double d_g = dc[j] * gi[j];
      const double d_f = c_prev != nullptr ? dc[j] * c_prev[j] : 0.0;
      dz[j] = d_i * gi[j] * (1.0 - gi[j]);
      dz[H + j] = d_f * gf[j] * (1.0 - gf[j]);
      dz[2 * H + j] = d_g * (1.0 - gg[j] * gg[j]);
      dz[3 * H + j] = d_o * go[j] * (1.0 - go[j]);
      dc[j] *= gf[j];  // carried to c_{t-1}
    }

    std::fill(dh_prev, dh_prev + H, 0.0);
    for (std::size_t g = 0; g < kNumGates; ++g) {
      const Gate gate = static_cast<Gate>(g);
      const double* dzg = dz + g * H;
      auto gb = grad.bias(gate);
      for (std::size_t j = 0; j < H; ++j) gb[j] += dzg[j];
      double* gwx = grad.input_weights(gate).data();
      for (std::size_t k = 0; k < D; ++k) {
        const double xk = x[k];
        if (xk == 0.0) continue;
        double* row = gwx + k * H;
        for (std::size_t j = 0; j < H; ++j) row[j] += xk * dzg[j];
      }
      if (h_prev != nullptr) {
        double* gwh = grad.recurrent_weights(gate).data();
        const double* wh = p.recurrent_weights(gate).data();
        for (std::size_t k = 0; k < H; ++k) {
          const double hk = h_prev[k];
          double* grow = gwh + k * H;
          const double* wrow = wh + k * H;
          double acc = 0.0;
          for (std::size_t j = 0; j < H; ++j) {
            grow[j] += hk * dzg[j];
            acc += wrow[j] * dzg[j];
          }
          dh_prev[k] += acc;
        }
      }
    }
    std::copy(dh_prev, dh_prev + H, dh);
  }
}

double clip_probability(double p) {
  return std::clamp(p, kProbabilityClip, 1.0 - kProbabilityClip);
}

double sample_loss(double p, int y, double positive_weight) {
  const double q = clip_probability(p);
  return y == 1 ? -positive_weight * std::log(q) : -std::log(1.0 - q);
}

/// d(sample loss)/d(logit) before averaging.
double sample_dlogit(double p, int y, double positive_weight) {
  return y == 1 ? positive_weight * (p - 1.0) : p;
}

void accumulate_range(const LstmParams& params, std::span<const Window> windows,
                      std::span<const std::size_t> indices, std::size_t begin, std::size_t end,
                      double positive_weight, double inv_n, LstmGradients& grad, double& loss) {
  Trace tr;
  std::vector<double> scratch;
  for (std::size_t k = begin; k < end; ++k) {
    const Window& w = windows[indices[k]];
    forward_trace(params, w.values, tr);
    const double p = sigmoid(tr.logit);
    loss += sample_loss(p, w.label, positive_weight) * inv_n;
    backward_trace(params, w.values, tr, sample_dlogit(p, w.label, positive_weight) * inv_n,
                   grad, scratch);
  }
}

void orthogonal_block(std::span<double> m, std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& v : m) v = gauss(rng);
  // Modified Gram-Schmidt on the columns of the row-major n x n block.
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      double dot = 0.0;
      for (std::size_t r = 0; r < n; ++r) dot += m[r * n + j] * m[r * n + k];
      for (std::size_t r = 0; r < n; ++r) m[r * n + j] -= dot * m[r * n + k];
    }
    double norm = 0.0;
    for (std::size_t r = 0; r < n; ++r) norm += m[r * n + j] * m[r * n + j];
    norm = std::sqrt(norm);
    for (std::size_t r = 0; r < n; ++r) m[r * n + j] /= norm;
  }
}

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) {
      throw ParseError("model parse error: truncated file");
    }
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  [[nodiscard]] std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

constexpr char kMagic[8] = {'K', 'P', 'M', 'L', 'S', 'T', 'M', '1'};

}  // namespace

LstmParams::LstmParams(std::size_t input_dim, std::size_t hidden)
    : input_dim_(input_dim), hidden_(hidden), data_(parameter_count(input_dim, hidden), 0.0) {
  if (input_dim == 0 || hidden == 0) throw InvalidArgument("LSTM dimensions must be >= 1");
}

std::size_t LstmParams::parameter_count(std::size_t input_dim, std::size_t hidden) {
  return kNumGates * (input_dim * hidden + hidden * hidden + hidden) + hidden + 1;
}

std::size_t LstmParams::gate_offset(Gate g) const {
  return static_cast<std::size_t>(g) * (input_dim_ * hidden_ + hidden_ * hidden_ + hidden_);
}

std::span<double> LstmParams::input_weights(Gate g) {
  return std::span<double>(data_).subspan(gate_offset(g), input_dim_ * hidden_);
}
std::span<const double> LstmParams::input_weights(Gate g) const {
  return std::span<const double>(data_).subspan(gate_offset(g), input_dim_ * hidden_);
}
std::span<double> LstmParams::recurrent_weights(Gate g) {
  return std::span<double>(data_).subspan(gate_offset(g) + input_dim_ * hidden_, hidden_ * hidden_);
}
std::span<const double> LstmParams::recurrent_weights(Gate g) const {
  return std::span<const double>(data_).subspan(gate_offset(g) + input_dim_ * hidden_,
                                                hidden_ * hidden_);
}
std::span<double> LstmParams::bias(Gate g) {
  return std::span<double>(data_).subspan(
      gate_offset(g) + input_dim_ * hidden_ + hidden_ * hidden_, hidden_);
}
std::span<const double> LstmParams::bias(Gate g) const {
  return std::span<const double>(data_).subspan(
      gate_offset(g) + input_dim_ * hidden_ + hidden_ * hidden_, hidden_);
}
std::span<double> LstmParams::head_weights() {
  return std::span<double>(data_).subspan(data_.size() - hidden_ - 1, hidden_);
}
std::span<const double> LstmParams::head_weights() const {
  return std::span<const double>(data_).subspan(data_.size() - hidden_ - 1, hidden_);
}

void LstmParams::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

LstmParams init_model(std::uint64_t seed, std::size_t input_dim, std::size_t hidden) {
  LstmParams p(input_dim, hidden);
  std::mt19937_64 rng(seed);
  // Glorot over the concatenated input kernel (input_dim x 4*hidden).
  const double limit = std::sqrt(6.0 / double(input_dim + kNumGates * hidden));
  std::uniform_real_distribution<double> uniform(-limit, limit);
  for (std::size_t g = 0; g < kNumGates; ++g) {
    for (auto& v : p.input_weights(static_cast<Gate>(g))) v = uniform(rng);
  }
  for (std::size_t g = 0; g < kNumGates; ++g) {
    orthogonal_block(p.recurrent_weights(static_cast<Gate>(g)), hidden, rng);
  }
  for (auto& v : p.bias(Gate::Forget)) v = 1.0;
  const double head_limit = std::sqrt(6.0 / double(hidden + 1));
  std::uniform_real_distribution<double> head_uniform(-head_limit, head_limit);
  for (auto& v : p.head_weights()) v = head_uniform(rng);
  return p;
}

Prediction classify(double probability, double threshold) {
  return {probability, probability >= threshold ? 1 : 0};
}

double predict_logit(const LstmParams& params, std::span<const double> sequence) {
  check_sequence(params, sequence);
  Trace tr;
  forward_trace(params, sequence, tr);
  return tr.logit;
}

double predict_proba(const LstmParams& params, std::span<const double> sequence) {
  return sigmoid(predict_logit(params, sequence));
}

void predict_proba_rows_serial(const LstmParams& params, std::span<const double> rows,
                               std::size_t row_length, std::span<double> out) {
  if (row_length == 0 || rows.size() != row_length * out.size()) {
    throw InvalidArgument("predict_proba_rows: shape mismatch");
  }
  check_sequence(params, rows);
  Trace tr;
  for (std::size_t r = 0; r < out.size(); ++r) {
    forward_trace(params, rows.subspan(r * row_length, row_length), tr);
    out[r] = sigmoid(tr.logit);
  }
}

void predict_proba_rows(const LstmParams& params, std::span<const double> rows,
                        std::size_t row_length, std::span<double> out) {
  if (row_length == 0 || rows.size() != row_length * out.size()) {
    throw InvalidArgument("predict_proba_rows: shape mismatch");
  }
  check_sequence(params, rows);
  const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel
  {
    Trace tr;
#pragma omp for schedule(static)
    for (std::ptrdiff_t r = 0; r < n; ++r) {
      forward_trace(params, rows.subspan(std::size_t(r) * row_length, row_length), tr);
      out[std::size_t(r)] = sigmoid(tr.logit);
    }
  }
}

std::vector<double> predict_proba_serial(const LstmParams& params,
                                         std::span<const Window> windows) {
  std::vector<double> out(windows.size());
  Trace tr;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    check_sequence(params, windows[i].values);
    forward_trace(params, windows[i].values, tr);
    out[i] = sigmoid(tr.logit);
  }
  return out;
}

std::vector<double> predict_proba(const LstmParams& params, std::span<const Window> windows) {
  for (const auto& w : windows) check_sequence(params, w.values);
  std::vector<double> out(windows.size());
  const auto n = static_cast<std::ptrdiff_t>(windows.size());
#pragma omp parallel
  {
    Trace tr;
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      forward_trace(params, windows[std::size_t(i)].values, tr);
      out[std::size_t(i)] = sigmoid(tr.logit);
    }
  }
  return out;
}

double bce_loss(std::span<const double> probabilities, std::span<const int> labels,
                double positive_weight) {
  if (probabilities.size() != labels.size()) {
    throw InvalidArgument("bce_loss: length mismatch");
  }
  if (probabilities.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    total += sample_loss(probabilities[i], labels[i], positive_weight);
  }
  return total / double(probabilities.size());
}

LossAndGradient loss_and_gradient_serial(const LstmParams& params,
                                         std::span<const Window> windows,
                                         std::span<const std::size_t> indices,
                                         double positive_weight) {
  LossAndGradient out{0.0, LstmGradients(params.input_dim(), params.hidden())};
  if (indices.empty()) return out;
  accumulate_range(params, windows, indices, 0, indices.size(), positive_weight,
                   1.0 / double(indices.size()), out.gradient, out.loss);
  return out;
}

LossAndGradient loss_and_gradient(const LstmParams& params, std::span<const Window> windows,
                                  std::span<const std::size_t> indices,
                                  double positive_weight) {
  LossAndGradient out{0.0, LstmGradients(params.input_dim(), params.hidden())};
  if (indices.empty()) return out;
  const double inv_n = 1.0 / double(indices.size());
  const std::size_t chunks = (indices.size() + kGradientChunk - 1) / kGradientChunk;
  if (chunks == 1) {
    accumulate_range(params, windows, indices, 0, indices.size(), positive_weight, inv_n,
                     out.gradient, out.loss);
    return out;
  }
  std::vector<LstmGradients> partial(chunks,
                                     LstmGradients(params.input_dim(), params.hidden()));
  std::vector<double> partial_loss(chunks, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    const std::size_t begin = std::size_t(c) * kGradientChunk;
    const std::size_t end = std::min(indices.size(), begin + kGradientChunk);
    accumulate_range(params, windows, indices, begin, end, positive_weight, inv_n,
                     partial[std::size_t(c)], partial_loss[std::size_t(c)]);
  }
  auto total = out.gradient.values();
  for (std::size_t c = 0; c < chunks; ++c) {
    const auto part = partial[c].values();
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += part[i];
    out.loss += partial_loss[c];
  }
  return out;
}

AdamOptimizer::AdamOptimizer(std::size_t parameter_count, AdamConfig config)
    : config_(config), m_(parameter_count, 0.0), v_(parameter_count, 0.0) {
  if (!(config.learning_rate > 0.0)) throw InvalidArgument("learning rate must be > 0");
}

void AdamOptimizer::step(std::span<double> params, std::span<const double> gradient) {
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, double(t_));
  const double correction2 = 1.0 - std::pow(b2, double(t_));
  const double step = config_.learning_rate * std::sqrt(correction2) / correction1;
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * gradient[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * gradient[i] * gradient[i];
    params[i] -= step * m_[i] / (std::sqrt(v_[i]) + config_.epsilon * std::sqrt(correction2));
  }
}

FitResult fit(const LstmParams& initial, std::span<const Window> train,
              std::span<const Window> validation, const TrainConfig& config) {
  if (train.empty()) throw InvalidArgument("fit: empty training set");
  if (config.batch_size < 1) throw InvalidArgument("fit: batch_size must be >= 1");
  if (validation.empty() && config.patience > 0) {
    throw InvalidArgument("fit: early stopping needs a non-empty validation set");
  }

  FitResult result{initial, {}, 0, std::numeric_limits<double>::infinity()};
  LstmParams params = initial;
  AdamOptimizer adam(params.size(), config.adam);
  std::mt19937_64 rng(config.seed);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<int> val_labels;
  for (const auto& w : validation) val_labels.push_back(w.label);

  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= std::max<std::size_t>(config.max_epochs, 1); ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const auto batch = std::span<const std::size_t>(order).subspan(start, end - start);
      auto lg = config.parallel
                    ? loss_and_gradient(params, train, batch, config.positive_weight)
                    : loss_and_gradient_serial(params, train, batch, config.positive_weight);
      epoch_loss += lg.loss * double(batch.size());
      adam.step(params.values(), lg.gradient.values());
    }
    epoch_loss /= double(order.size());

    double val_loss = epoch_loss;
    if (!validation.empty()) {
      const auto probs = config.parallel ? predict_proba(params, validation)
                                         : predict_proba_serial(params, validation);
      val_loss = bce_loss(probs, val_labels, config.positive_weight);
    }
    result.history.push_back({epoch, epoch_loss, val_loss});

    if (val_loss < result.best_validation_loss) {
      result.best_validation_loss = val_loss;
      result.best_epoch = epoch;
      result.params = params;
      stale = 0;
    } else {
      ++stale;
    }
    if (stale >= config.patience) break;
  }
  return result;
}

ModelVersionError::ModelVersionError(std::uint32_t found)
    : Error(fmt::format("model parse error: unsupported format version {} (expected {})", found,
                        kModelFormatVersion)),
      found_(found) {}

std::vector<std::uint8_t> serialize_model(const DetectorModel& model) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kModelFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.params.input_dim()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.params.hidden()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.window_steps));
  put<std::uint64_t>(out, model.params.size());
  for (double v : model.params.values()) put<double>(out, v);
  put<std::uint8_t>(out, model.scaler ? 1 : 0);
  if (model.scaler) {
    if (model.params.input_dim() != kNumFeatures) {
      throw InvalidArgument("a scaler requires input_dim == 14");
    }
    for (double v : model.scaler->min) put<double>(out, v);
    for (double v : model.scaler->max) put<double>(out, v);
  }
  put<double>(out, model.threshold);
  return out;
}

DetectorModel deserialize_model(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  char magic[8];
  for (auto& c : magic) c = static_cast<char>(in.get<std::uint8_t>());
  if (!std::equal(std::begin(magic), std::end(magic), std::begin(kMagic))) {
    throw ParseError("model parse error: bad magic");
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kModelFormatVersion) throw ModelVersionError(version);
  const auto input_dim = in.get<std::uint32_t>();
  const auto hidden = in.get<std::uint32_t>();
  const auto steps = in.get<std::uint32_t>();
  const auto count = in.get<std::uint64_t>();
  if (input_dim == 0 || hidden == 0 || input_dim > 4096 || hidden > 4096 ||
      count != LstmParams::parameter_count(input_dim, hidden)) {
    throw ParseError("model parse error: inconsistent dimensions");
  }
  if (in.remaining() < count * sizeof(double)) {
    throw ParseError("model parse error: truncated file");
  }
  DetectorModel model{LstmParams(input_dim, hidden), steps, std::nullopt, kDefaultThreshold};
  for (auto& v : model.params.values()) {
    v = in.get<double>();
    if (!std::isfinite(v)) throw ParseError("model parse error: non-finite parameter");
  }
  const auto has_scaler = in.get<std::uint8_t>();
  if (has_scaler > 1) throw ParseError("model parse error: bad scaler flag");
  if (has_scaler == 1) {
    if (input_dim != kNumFeatures) throw ParseError("model parse error: scaler shape");
    Scaler s;
    for (auto& v : s.min) v = in.get<double>();
    for (auto& v : s.max) v = in.get<double>();
    model.scaler = s;
  }
  model.threshold = in.get<double>();
  if (in.remaining() != 0) throw ParseError("model parse error: trailing bytes");
  return model;
}

void save_model(const DetectorModel& model, const std::filesystem::path& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

DetectorModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace sentinel
