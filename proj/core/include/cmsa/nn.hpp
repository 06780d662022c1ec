#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cmsa/label.hpp"
#include "cmsa/textrep.hpp"

namespace cmsa::nn {

/// Row-major dense matrix; column vectors have cols == 1.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
  bool operator==(const Tensor&) const = default;
};

enum Gate : std::size_t { kInput = 0, kForget = 1, kOutput = 2, kCell = 3 };
inline constexpr std::array<std::string_view, 4> kGateNames = {"i", "f", "o", "g"};

/// One LSTM direction: per gate, input weights W (h x d), recurrent
/// weights U (h x h) and bias b (h).
struct LstmParams {
  std::size_t input = 0;
  std::size_t hidden = 0;
  std::array<Tensor, 4> W;
  std::array<Tensor, 4> U;
  std::array<Tensor, 4> b;

  static LstmParams zeros(std::size_t input, std::size_t hidden);
  bool operator==(const LstmParams&) const = default;
};

struct BiLstmLayer {
  LstmParams forward;
  LstmParams backward;
  bool operator==(const BiLstmLayer&) const = default;
};

/// Additive scoring e_t = v . tanh(W h_t + b).
struct AttentionParams {
  Tensor W;  // a x 2h
  Tensor b;  // a
  Tensor v;  // a
  bool operator==(const AttentionParams&) const = default;
};

enum class Variant { Stacked, Attention, Pooling };

std::string_view to_string(Variant v) noexcept;
std::optional<Variant> parse_variant(std::string_view s) noexcept;

struct Dims {
  std::size_t input = 0;
  std::size_t hidden = 0;
  std::size_t layers = 1;
  std::size_t attention = 0;  // only used by Variant::Attention
  bool operator==(const Dims&) const = default;
};

/// Width of the summary vector fed to the classification head.
std::size_t summary_width(Variant v, const Dims& d) noexcept;

struct ModelParams {
  Variant variant = Variant::Stacked;
  Dims dims;
  std::vector<BiLstmLayer> layers;
  std::optional<AttentionParams> attention;
  Tensor head_W;  // 3 x k
  Tensor head_b;  // 3
  /// Present when the embedding table is trained together with the model;
  /// inputs are then looked up from EmbeddedSequence::ids.
  std::optional<textrep::EmbeddingTable> embedding;

  /// All-zero parameters with the layout implied by (variant, dims).
  /// Throws ShapeError for a stacked model with fewer than two layers.
  static ModelParams zeros(Variant variant, const Dims& dims);

  /// Visits every parameter tensor with a stable name, in a fixed order.
  void for_each(const std::function<void(std::string_view, std::span<double>)>& f);
  void for_each(
      const std::function<void(std::string_view, std::span<const double>)>& f) const;

  std::size_t parameter_count() const;
  /// Same layout, every entry zero.
  ModelParams zeros_like() const;

  bool operator==(const ModelParams&) const = default;
};

/// Uniform(+-1/sqrt(h)) weights, zero biases, forget-gate bias 1.
ModelParams init_params(Variant variant, const Dims& dims, std::uint64_t seed);

/// Numerically stable softmax (max subtracted).
std::vector<double> softmax(std::span<const double> z);

struct LstmState {
  std::vector<double> h;
  std::vector<double> c;
};

/// Everything the backward step needs from one forward step.
struct LstmStepCache {
  std::vector<double> x, h_prev, c_prev;
  std::array<std::vector<double>, 4> gate;  // post-activation i, f, o, g
  std::vector<double> c, tanh_c, h;
};

/// Standard cell: i,f,o = sigmoid(W x + U h_prev + b), g = tanh(...),
/// c = f*c_prev + i*g, h = o*tanh(c). Throws ShapeError on mismatch.
LstmState lstm_step(std::span<const double> x, std::span<const double> h_prev,
                    std::span<const double> c_prev, const LstmParams& p);
LstmStepCache lstm_step_cached(std::span<const double> x,
                               std::span<const double> h_prev,
                               std::span<const double> c_prev,
                               const LstmParams& p);

/// Accumulates parameter gradients into `grad` and writes input/state
/// gradients into dx, dh_prev, dc_prev (overwritten).
void lstm_step_backward(const LstmStepCache& cache, std::span<const double> dh,
                        std::span<const double> dc, const LstmParams& p,
                        LstmParams& grad, std::span<double> dx,
                        std::span<double> dh_prev, std::span<double> dc_prev);

/// T_max x 2h output: row t is [forward h_t | backward h_t] for t < length,
/// zero otherwise. Throws ShapeError if the input width does not match.
Tensor bilstm_forward(const textrep::EmbeddedSequence& seq, const BiLstmLayer& layer);

struct ForwardResult {
  ClassProbs probs{};
  /// Attention weight per position, zero where masked (Attention variant only).
  std::vector<double> attention;
};

/// Dispatches on params.variant. Throws ShapeError on empty sequences or
/// mismatched widths.
ForwardResult forward(const textrep::EmbeddedSequence& seq, const ModelParams& params);
ClassProbs forward_stacked(const textrep::EmbeddedSequence& seq, const ModelParams& params);
ForwardResult forward_attention(const textrep::EmbeddedSequence& seq,
                                const ModelParams& params);
ClassProbs forward_pooling(const textrep::EmbeddedSequence& seq, const ModelParams& params);

/// Cross-entropy -log p[gold]; adds d(loss)/d(params) into `grad`, which
/// must have the layout of `params`.
double loss_and_gradient(const textrep::EmbeddedSequence& seq, Label gold,
                         const ModelParams& params, ModelParams& grad);

struct LabeledSequence {
  textrep::EmbeddedSequence seq;
  Label label = Label::Neutral;
};

struct TrainConfig {
  std::size_t hidden = 32;
  std::size_t layers = 2;          // stacked variant depth
  std::size_t encoder_layers = 1;  // attention / pooling depth
  std::size_t attention_width = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double clip_norm = 5.0;
  std::size_t patience = 3;
  std::uint64_t seed = 0;
  bool train_embeddings = false;

  bool operator==(const TrainConfig&) const = default;
};

Dims dims_for(Variant variant, std::size_t input_dim, const TrainConfig& cfg);

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
  bool operator==(const TrainHistory&) const = default;
};

struct TrainResult {
  ModelParams params;
  TrainHistory history;
};

double mean_loss(std::span<const LabeledSequence> data, const ModelParams& params);

/// Mini-batch Adam on mean cross-entropy with global-norm clipping and
/// early stopping on validation loss (training loss when `val` is empty).
/// Parameters start from init_params(variant, dims, derive_seed(cfg.seed, 1))
/// and batches are shuffled by derive_seed(cfg.seed, 2).
/// Returns the best-validation parameters. When cfg.train_embeddings is
/// set, `embedding` is copied into the model and updated as well.
/// Throws TrainingError on a non-finite loss.
TrainResult train(Variant variant, std::span<const LabeledSequence> train_set,
                  std::span<const LabeledSequence> val_set, const TrainConfig& cfg,
                  const textrep::EmbeddingTable* embedding = nullptr);

enum class CheckpointFormat { Json, Binary };

struct Checkpoint {
  ModelParams params;
  TrainConfig config;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path,
                     CheckpointFormat format = CheckpointFormat::Json);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cmsa::nn
