#include "ccqt/ctensor/adam.hpp"

#include <cmath>
#include <string>

#include "ccqt/errors.hpp"

namespace ccqt {

namespace {

void update_plane(std::span<double> theta, std::span<const double> grad,
                  std::vector<double>& m, std::vector<double>& v,
                  const AdamHyper& h, double bias1, double bias2) {
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i] + h.weight_decay * theta[i];
    m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
    v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
    const double m_hat = m[i] / bias1;
    const double v_hat = v[i] / bias2;
    theta[i] -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon);
  }
}

}  // namespace

void adam_step(std::span<ComplexTensor> params, AdamState& state) {
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p].has_grad())
      throw StateError("adam_step: parameter " + std::to_string(p) +
                       " has no gradient");
    params[p].check_finite("adam_step parameter " + std::to_string(p));
  }
  if (state.moments.empty()) {
    state.moments.resize(params.size());
    for (std::size_t p = 0; p < params.size(); ++p) {
      const auto n = params[p].size();
      state.moments[p] = {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                          std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    }
  }
  if (state.moments.size() != params.size())
    throw StateError("adam_step: parameter list changed between steps");

  state.step += 1;
  const auto& h = state.hyper;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(h.beta1, t);
  const double bias2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& mo = state.moments[p];
    auto& param = params[p];
    if (mo.m_re.size() != param.size())
      throw StateError("adam_step: parameter " + std::to_string(p) +
                       " changed shape");
    update_plane(param.real_mut(), param.grad_real(), mo.m_re, mo.v_re, h,
                 bias1, bias2);
    update_plane(param.imag_mut(), param.grad_imag(), mo.m_im, mo.v_im, h,
                 bias1, bias2);
    param.check_finite("adam_step update of parameter " + std::to_string(p));
    param.clear_grad();
  }
}

}  // namespace ccqt
