#pragma once

// Finite-difference oracle for saliency maps: perturb Re and Im of one bin
// separately, difference |logit[target]| centrally, take the norm.

#include <algorithm>
#include <cmath>
#include <random>

#include "ccqt/ctensor/autograd.hpp"
#include "ccqt/explain/saliency.hpp"
#include "ccqt/nn/model.hpp"

namespace ccqt::testing {

inline double logit_magnitude(nn::Model& model, const ComplexTensor& z, int target) {
  NoGradGuard no_grad;
  const auto out = model.forward(z.reshape({1, 1, z.dim(0), z.dim(1)}), nn::Mode::kEval);
  return std::abs(out.logits.at(static_cast<std::size_t>(target)));
}

inline double fd_sensitivity(nn::Model& model, const ComplexTensor& z, int target, std::size_t i) {
  const double h = 1e-5 * std::max(std::abs(z.at(i)), 1e-12);
  auto partial = [&](bool imag) {
    auto plus = z.clone(), minus = z.clone();
    (imag ? plus.imag_mut() : plus.real_mut())[i] += h;
    (imag ? minus.imag_mut() : minus.real_mut())[i] -= h;
    return (logit_magnitude(model, plus, target) - logit_magnitude(model, minus, target)) / (2 * h);
  };
  return std::hypot(partial(false), partial(true));
}

struct SaliencyFdResult {
  double worst = 0.0;
  std::size_t bins = 0;
};

// Relative error |analytic − fd| / max(analytic, fd) on `count` random bins.
inline SaliencyFdResult saliency_fd_check(nn::Model& model, const dsp::ComplexSpectrogram& spec,
                                          int target, std::size_t count, std::uint64_t seed) {
  const auto map = explain::saliency(model, spec, target);
  const double scale = *std::max_element(map.values.begin(), map.values.end());
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, spec.data.size() - 1);
  SaliencyFdResult r;
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t i = pick(rng);
    const double a = map.values[i];
    const double fd = fd_sensitivity(model, spec.data, target, i);
    const double denom = std::max({a, fd, 1e-9 * scale});
    r.worst = std::max(r.worst, std::abs(a - fd) / denom);
    ++r.bins;
  }
  return r;
}

}  // namespace ccqt::testing
