#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ccqt/ctensor/tensor.hpp"

namespace ccqt {

struct AdamHyper {
  double learning_rate = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-6;  // L2 term added to the gradient
};

// Adam moments, one (m, v) pair per real component: each complex parameter
// is optimized as two independent reals.
struct AdamState {
  AdamHyper hyper;
  std::uint64_t step = 0;
  struct Moments {
    std::vector<double> m_re, m_im, v_re, v_im;
  };
  std::vector<Moments> moments;  // parallel to the parameter list
};

// One Adam update over `params`, which must all carry a gradient. The
// parameter list must be the same (same order and shapes) on every call
// with a given state. Gradients are cleared afterwards.
void adam_step(std::span<ComplexTensor> params, AdamState& state);

}  // namespace ccqt
