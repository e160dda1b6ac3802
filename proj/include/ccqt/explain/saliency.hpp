#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccqt/dsp/cqt.hpp"
#include "ccqt/nn/model.hpp"

namespace ccqt::explain {

struct SaliencyMap {
  std::size_t bins = 0;    // F
  std::size_t frames = 0;  // T
  std::vector<double> values;  // (F, T) row-major, all >= 0
  std::string clip_id;
  int target_class = 1;
  std::size_t n_samples = 1;
  double sigma = 0.0;

  double at(std::size_t k, std::size_t t) const { return values[k * frames + t]; }
};

// Per bin sqrt((∂y/∂Re z)² + (∂y/∂Im z)²) with y = |logit[target_class]|,
// the model in eval mode. `spec` must carry full phase; the model must have
// running statistics.
SaliencyMap saliency(nn::Model& model, const dsp::ComplexSpectrogram& spec, int target_class);

// The saliency map of SmoothGrad sample `index`: spec plus the noise that
// sample draws (see smoothgrad).
SaliencyMap noisy_saliency(nn::Model& model, const dsp::ComplexSpectrogram& spec, int target_class,
                           double sigma, std::uint64_t seed, std::size_t index);

// Mean of n saliency maps on spec + noise, where sample s adds i.i.d.
// N(0, (sigma · max|z|)²) to the real and imaginary planes from the stream
// derive_seed(seed, {s}). With sigma = 0 no noise is drawn at all.
SaliencyMap smoothgrad(nn::Model& model, const dsp::ComplexSpectrogram& spec, int target_class,
                       std::size_t n = 32, double sigma = 0.1, std::uint64_t seed = 0);

// Plain P2: width T, height F, maxval 255, highest bin on the first row.
// Values are min-max scaled and rounded; a constant map exports as zeros.
void export_pgm(const SaliencyMap& map, const std::string& path);
// Header `k,t,value`, one row per bin (k-major), values at %.17g.
void export_csv(const SaliencyMap& map, const std::string& path);
// Reads export_csv output back; rows may come in any order but every (k, t)
// must appear exactly once.
SaliencyMap import_csv(const std::string& path);

}  // namespace ccqt::explain
