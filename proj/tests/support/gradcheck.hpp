#pragma once

// Central finite-difference oracle for (dL/dRe, dL/dIm) gradients. Test-only;
// evaluates the loss as a black box and never looks at recorded graphs.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "ccqt/ctensor/autograd.hpp"
#include "ccqt/ctensor/tensor.hpp"

namespace ccqt::testing {

struct FdGrad {
  std::vector<double> re;
  std::vector<double> im;
  std::vector<std::size_t> indices;  // positions actually perturbed
};

inline double scalar_loss(const std::function<ComplexTensor()>& loss_fn) {
  NoGradGuard guard;
  return loss_fn().real()[0];
}

// Perturbs each component of `leaf` by ±h and differentiates loss_fn.
// `real_only` leaves the imaginary plane alone (real-valued parameters).
// `indices` restricts the check to a subset of flat positions (all if empty).
inline FdGrad finite_difference(const std::function<ComplexTensor()>& loss_fn,
                                ComplexTensor leaf, double h = 1e-6,
                                std::vector<std::size_t> indices = {},
                                bool real_only = false) {
  if (indices.empty())
    for (std::size_t i = 0; i < leaf.size(); ++i) indices.push_back(i);
  FdGrad g{std::vector<double>(leaf.size(), 0.0),
           std::vector<double>(leaf.size(), 0.0), indices};
  for (std::size_t i : indices) {
    for (int part = 0; part < (real_only ? 1 : 2); ++part) {
      auto plane = part == 0 ? leaf.real_mut() : leaf.imag_mut();
      const double saved = plane[i];
      plane[i] = saved + h;
      const double up = scalar_loss(loss_fn);
      plane[i] = saved - h;
      const double down = scalar_loss(loss_fn);
      plane[i] = saved;
      (part == 0 ? g.re : g.im)[i] = (up - down) / (2.0 * h);
    }
  }
  return g;
}

inline void analytic_gradient(const std::function<ComplexTensor()>& loss_fn,
                              std::vector<ComplexTensor> leaves) {
  for (auto& l : leaves) l.clear_grad();
  backward(loss_fn());
}

// Norm-wise relative error ||a − f|| / max(||a||, ||f||) over both planes.
inline double relative_error(const ComplexTensor& leaf, const FdGrad& fd) {
  double diff = 0.0, na = 0.0, nf = 0.0;
  const auto gr = leaf.grad_real(), gi = leaf.grad_imag();
  for (std::size_t i : fd.indices) {
    diff += (gr[i] - fd.re[i]) * (gr[i] - fd.re[i]) +
            (gi[i] - fd.im[i]) * (gi[i] - fd.im[i]);
    na += gr[i] * gr[i] + gi[i] * gi[i];
    nf += fd.re[i] * fd.re[i] + fd.im[i] * fd.im[i];
  }
  const double denom = std::sqrt(std::max(na, nf));
  if (denom == 0.0) return 0.0;
  return std::sqrt(diff) / denom;
}

inline ComplexTensor random_tensor(Shape shape, std::mt19937_64& rng,
                                   double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  const auto n = numel(shape);
  std::vector<double> re(n), im(n);
  for (auto& v : re) v = u(rng);
  for (auto& v : im) v = u(rng);
  return ComplexTensor::from_planes(std::move(shape), std::move(re), std::move(im));
}

}  // namespace ccqt::testing
