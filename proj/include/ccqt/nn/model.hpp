#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccqt/ctensor/tensor.hpp"
#include "ccqt/dsp/cqt.hpp"
#include "ccqt/dsp/features.hpp"
#include "ccqt/kv.hpp"
#include "ccqt/nn/layers.hpp"
#include "ccqt/rng.hpp"

namespace ccqt::nn {

enum class TimePooling { kMean, kMagnitudeMax };

struct ModelConfig {
  std::vector<std::size_t> conv_channels{16, 32, 64, 128};
  std::vector<std::size_t> linear_widths{256, 128, 2};
  double dropout_p = 0.4;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
  // CReLU and dropout after the final (logit) projection as well.
  bool activate_last_linear = false;
  TimePooling pooling = TimePooling::kMean;
  double log_alpha_init = 1.0;
  double log_c_init = 0.0;
  double log_epsilon = 1e-3;

  static constexpr std::size_t kKernel = 3;
  static constexpr std::size_t kStride = 2;
  static constexpr std::size_t kPadding = 1;

  void validate() const;
  void to_kv(KeyValues& kv, const std::string& prefix = "model.") const;
  static ModelConfig from_kv(const KeyValues& kv, const std::string& prefix = "model.");
};

struct NamedTensor {
  std::string name;
  ComplexTensor tensor;
};

struct ForwardResult {
  ComplexTensor logits;  // (B, 2)
  ComplexTensor scores;  // (B, 2), real-valued rows summing to 1
};

class Model {
 public:
  // Weights drawn from `seed`; BN starts without running statistics.
  Model(ModelConfig config, dsp::CqtConfig features, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  // spec_batch is (B, 1, F, T). In training mode dropout draws from
  // `dropout_rng`, which must then be non-null.
  ForwardResult forward(const ComplexTensor& spec_batch, Mode mode,
                        Rng* dropout_rng = nullptr, bool update_bn_stats = true);

  // Trainable tensors in a fixed order.
  std::vector<NamedTensor> parameters() const;
  // Everything a checkpoint stores: parameters plus BN running statistics
  // (running_var lives in the real plane).
  std::vector<NamedTensor> state() const;
  // Copies values from `tensors` (matched by name) into this model.
  void load_state(const std::vector<NamedTensor>& tensors, bool bn_stats_present);
  // Deep copy with independent storage.
  Model clone() const;

  // Projects log_compress.alpha to at least kMinAlpha after an optimizer step.
  void clamp_constrained();
  static constexpr double kMinAlpha = 1e-4;

  std::size_t parameter_count() const;  // complex entries across parameters()
  std::size_t min_spatial() const;      // smallest F, T accepted by forward
  bool has_bn_stats() const;

  const ModelConfig& config() const { return config_; }
  const dsp::CqtConfig& features() const { return features_; }
  const dsp::LogCompressParams& log_compress() const { return log_; }
  dsp::LogCompressParams& log_compress() { return log_; }

 private:
  Model() = default;

  struct Layer {
    ComplexTensor weight;
    ComplexTensor bias;
  };

  ModelConfig config_;
  dsp::CqtConfig features_;
  dsp::LogCompressParams log_;
  std::vector<Layer> convs_;
  std::vector<BatchNormState> norms_;
  std::vector<Layer> linears_;
  std::size_t folded_bins_ = 0;  // F after the conv stack
};

}  // namespace ccqt::nn
