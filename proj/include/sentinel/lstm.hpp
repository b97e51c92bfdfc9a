#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "sentinel/error.hpp"
#include "sentinel/kpm_data.hpp"

namespace sentinel {

enum class Gate : std::size_t { Input = 0, Forget = 1, Cell = 2, Output = 3 };
inline constexpr std::size_t kNumGates = 4;

/// All learnable parameters of a single-layer LSTM with a dense sigmoid head,
/// stored as one flat vector so optimizers and checkpoints see a single block.
///
/// Layout, per gate in the order i, f, g, o:
///   input weights      input_dim x hidden, row-major
///   recurrent weights  hidden x hidden, row-major
///   bias               hidden
/// followed by the head weights (hidden) and the head bias (1).
/// The same type holds gradients.
class LstmParams {
 public:
  LstmParams() : LstmParams(kNumFeatures, 32) {}
  LstmParams(std::size_t input_dim, std::size_t hidden);

  static std::size_t parameter_count(std::size_t input_dim, std::size_t hidden);

  [[nodiscard]] std::size_t input_dim() const { return input_dim_; }
  [[nodiscard]] std::size_t hidden() const { return hidden_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }

  std::span<double> values() { return data_; }
  [[nodiscard]] std::span<const double> values() const { return data_; }

  std::span<double> input_weights(Gate g);
  [[nodiscard]] std::span<const double> input_weights(Gate g) const;
  std::span<double> recurrent_weights(Gate g);
  [[nodiscard]] std::span<const double> recurrent_weights(Gate g) const;
  std::span<double> bias(Gate g);
  [[nodiscard]] std::span<const double> bias(Gate g) const;
  std::span<double> head_weights();
  [[nodiscard]] std::span<const double> head_weights() const;
  double& head_bias() { return data_.back(); }
  [[nodiscard]] double head_bias() const { return data_.back(); }

  void set_zero();

  friend bool operator==(const LstmParams&, const LstmParams&) = default;

 private:
  [[nodiscard]] std::size_t gate_offset(Gate g) const;

  std::size_t input_dim_;
  std::size_t hidden_;
  std::vector<double> data_;
};

using LstmGradients = LstmParams;

/// Glorot-uniform input weights, orthogonal recurrent weights, zero biases
/// except the forget gate (1.0). Deterministic under seed.
LstmParams init_model(std::uint64_t seed, std::size_t input_dim = kNumFeatures,
                      std::size_t hidden = 32);

struct Prediction {
  double probability = 0.5;
  int label = 0;
};

inline constexpr double kDefaultThreshold = 0.5;

Prediction classify(double probability, double threshold = kDefaultThreshold);

/// Class-1 probability of one flattened sequence (steps x input_dim,
/// row-major). Throws InvalidArgument on non-finite input.
double predict_proba(const LstmParams& params, std::span<const double> sequence);

/// Head pre-activation for one sequence.
double predict_logit(const LstmParams& params, std::span<const double> sequence);

/// Probabilities for `rows` flattened sequences stored back to back.
/// OpenMP-parallel over rows; results are identical to the serial kernel.
void predict_proba_rows(const LstmParams& params, std::span<const double> rows,
                        std::size_t row_length, std::span<double> out);
void predict_proba_rows_serial(const LstmParams& params, std::span<const double> rows,
                               std::size_t row_length, std::span<double> out);

std::vector<double> predict_proba(const LstmParams& params, std::span<const Window> windows);
std::vector<double> predict_proba_serial(const LstmParams& params,
                                         std::span<const Window> windows);

/// Mean weighted binary cross-entropy; probabilities are clipped to
/// [1e-12, 1 - 1e-12].
double bce_loss(std::span<const double> probabilities, std::span<const int> labels,
                double positive_weight = 1.0);

struct LossAndGradient {
  double loss = 0.0;
  LstmGradients gradient;
};

/// Exact BPTT gradient of the mean weighted BCE over windows[indices].
/// The parallel kernel reduces fixed-size chunks in index order, so its result
/// does not depend on the thread count.
LossAndGradient loss_and_gradient(const LstmParams& params, std::span<const Window> windows,
                                  std::span<const std::size_t> indices,
                                  double positive_weight = 1.0);
LossAndGradient loss_and_gradient_serial(const LstmParams& params,
                                         std::span<const Window> windows,
                                         std::span<const std::size_t> indices,
                                         double positive_weight = 1.0);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t parameter_count, AdamConfig config);
  void step(std::span<double> params, std::span<const double> gradient);
  [[nodiscard]] std::uint64_t steps() const { return t_; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
};

struct TrainConfig {
  std::size_t hidden = 32;
  std::size_t batch_size = 64;
  AdamConfig adam;
  std::size_t patience = 3;
  std::size_t max_epochs = 30;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
  double positive_weight = 1.0;
  bool parallel = true;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

struct FitResult {
  LstmParams params;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_validation_loss = 0.0;
};

/// Mini-batch Adam with early stopping on validation loss. Training stops once
/// `patience` consecutive epochs fail to improve (patience 0 runs exactly one
/// epoch) or after max_epochs; the best-validation parameters are returned.
FitResult fit(const LstmParams& initial, std::span<const Window> train,
              std::span<const Window> validation, const TrainConfig& config);

/// Deployable detector: weights plus the preprocessing needed to score raw KPMs.
struct DetectorModel {
  LstmParams params;
  std::size_t window_steps = 3;
  std::optional<Scaler> scaler;
  double threshold = kDefaultThreshold;

  friend bool operator==(const DetectorModel&, const DetectorModel&) = default;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

class ModelVersionError : public Error {
 public:
  explicit ModelVersionError(std::uint32_t found);
  [[nodiscard]] std::uint32_t found() const { return found_; }

 private:
  std::uint32_t found_;
};

std::vector<std::uint8_t> serialize_model(const DetectorModel& model);
DetectorModel deserialize_model(std::span<const std::uint8_t> bytes);
void save_model(const DetectorModel& model, const std::filesystem::path& path);
DetectorModel load_model(const std::filesystem::path& path);

}  // namespace sentinel
