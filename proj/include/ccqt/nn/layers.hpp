#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "ccqt/ctensor/tensor.hpp"
#include "ccqt/rng.hpp"

namespace ccqt::nn {

enum class Mode { kTrain, kEval };

// max(0, Re x) + i·max(0, Im x). Subgradient 0 at the kink.
ComplexTensor crelu(const ComplexTensor& x);

// Complex cross-correlation of x (B, Cin, H, W) with w (Cout, Cin, kh, kw)
// plus a per-channel bias (Cout). Output spatial size
// (H + 2·padding − kh) / stride + 1, which is ceil(H/2) for k3/s2/p1.
ComplexTensor complex_conv2d(const ComplexTensor& x, const ComplexTensor& w,
                             const ComplexTensor& bias, std::size_t stride = 2,
                             std::size_t padding = 1);

// Per-channel state of complex batch normalization. gamma/beta are the
// trainable affine terms; the running statistics are plain buffers.
struct BatchNormState {
  ComplexTensor gamma;  // (C), init 1
  ComplexTensor beta;   // (C), init 0
  std::vector<std::complex<double>> running_mean;
  std::vector<double> running_var;  // mean |z − μ|², biased
  bool has_stats = false;
  double momentum = 0.1;
  double eps = 1e-5;

  static BatchNormState make(std::size_t channels, double momentum = 0.1,
                             double eps = 1e-5);
  std::size_t channels() const { return running_var.size(); }
};

// x (B, C, ...) ↦ γ·(x − μ)/sqrt(mean|x − μ|² + eps) + β per channel.
// Training mode uses batch statistics and, unless update_stats is false,
// folds them into the running statistics with the configured momentum.
// Eval mode requires running statistics.
ComplexTensor complex_batchnorm(const ComplexTensor& x, BatchNormState& state,
                                Mode mode, bool update_stats = true);

// Zeroes whole complex units with probability p and scales survivors by
// 1/(1−p) in training mode; identity in eval mode.
ComplexTensor complex_dropout(const ComplexTensor& x, double p, Mode mode, Rng& rng);

// x (B, Cin, T) ↦ W·x[b] + bias for every time step: (B, Cout, T).
ComplexTensor linear_positionwise(const ComplexTensor& x, const ComplexTensor& w,
                                  const ComplexTensor& bias);

// Complex mean over the last axis: (B, C, T) → (B, C).
ComplexTensor time_mean(const ComplexTensor& x);

// For each (b, c) selects the time step of largest magnitude: (B, C, T) → (B, C).
ComplexTensor time_magmax(const ComplexTensor& x);

// Row-wise softmax of |z| over the last axis of a (B, K) tensor. Real-valued
// output (imaginary plane zero), differentiable.
ComplexTensor magnitude_softmax(const ComplexTensor& z);

// Mean over the batch of −log softmax(|z_b|)[label_b]. Real scalar output.
ComplexTensor cross_entropy(const ComplexTensor& logits,
                            const std::vector<int>& labels);

// Moves the last two axes of (B, C, F, T) into (B, C·F, T).
ComplexTensor fold_frequency(const ComplexTensor& x);

}  // namespace ccqt::nn
