#pragma once

#include <string>

#include "ccqt/ctensor/tensor.hpp"
#include "ccqt/dsp/cqt.hpp"
#include "ccqt/rng.hpp"

namespace ccqt::dsp {

// Trainable magnitude compression. alpha and c are single-element tensors
// with a zero imaginary plane; epsilon is fixed.
struct LogCompressParams {
  ComplexTensor alpha;
  ComplexTensor c;
  double epsilon = 1e-3;

  static LogCompressParams make(double alpha = 1.0, double c = 0.0,
                                double epsilon = 1e-3);
  double alpha_value() const { return alpha.real()[0]; }
  double c_value() const { return c.real()[0]; }
  void validate() const;
};

// |z|·e^(iθ) ↦ max(ε, −ln|z| + c) · α · e^(iθ), elementwise over any shape.
// Zero-magnitude entries map to ε·α with phase 0. Differentiable with
// respect to z, alpha and c.
ComplexTensor log_compress(const ComplexTensor& z, const LogCompressParams& params);
ComplexSpectrogram log_compress(const ComplexSpectrogram& spec,
                                const LogCompressParams& params);

// full: copy. zero: |z| + 0i. random: |z|·e^(iφ) with φ ~ U[0, 2π) per bin.
// Input must carry full phase.
ComplexSpectrogram phase_ablate(const ComplexSpectrogram& spec, PhaseMode mode,
                                Rng& rng);

// Debug export: header `t,k,re,im`, one row per bin, t-major.
void write_spectrogram_csv(const ComplexSpectrogram& spec, const std::string& path);

}  // namespace ccqt::dsp
