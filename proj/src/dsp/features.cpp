#include "ccqt/dsp/features.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "ccqt/ctensor/autograd.hpp"
#include "ccqt/errors.hpp"

namespace ccqt::dsp {

LogCompressParams LogCompressParams::make(double alpha, double c, double epsilon) {
  LogCompressParams p;
  p.alpha = ComplexTensor::scalar({alpha, 0.0});
  p.c = ComplexTensor::scalar({c, 0.0});
  p.alpha.set_requires_grad(true);
  p.c.set_requires_grad(true);
  p.epsilon = epsilon;
  p.validate();
  return p;
}

void LogCompressParams::validate() const {
  if (!alpha.defined() || !c.defined() || alpha.size() != 1 || c.size() != 1)
    throw ConfigError("log_compress parameters must be single-element tensors");
  if (!(alpha_value() > 0.0))
    throw ConfigError("log_compress alpha must be positive (got " +
                      std::to_string(alpha_value()) + ")");
  if (!(epsilon > 0.0))
    throw ConfigError("log_compress epsilon must be positive (got " +
                      std::to_string(epsilon) + ")");
}

ComplexTensor log_compress(const ComplexTensor& z, const LogCompressParams& params) {
  params.validate();
  const double alpha = params.alpha_value();
  const double c = params.c_value();
  const double eps = params.epsilon;
  const std::size_t n = z.size();
  const auto zr = z.real(), zi = z.imag();
  std::vector<double> re(n), im(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = std::hypot(zr[i], zi[i]);
    if (r == 0.0) {
      re[i] = eps * alpha;
      im[i] = 0.0;
      continue;
    }
    const double g = std::max(eps, -std::log(r) + c);
    const double s = alpha * g / r;
    re[i] = s * zr[i];
    im[i] = s * zi[i];
  }
  auto out = ComplexTensor::from_planes(z.shape(), std::move(re), std::move(im));
  out.check_finite("log_compress");

  const ComplexTensor alpha_t = params.alpha, c_t = params.c;
  record_op(out, "log_compress", {z, alpha_t, c_t},
            [z, alpha_t, c_t, alpha, c, eps](std::span<const double> gr,
                                              std::span<const double> gi) {
              const auto zr = z.real(), zi = z.imag();
              const bool need_z = z.requires_grad();
              GradPlanes gz{};
              if (need_z) gz = grad_buffers(z);
              double g_alpha = 0.0, g_c = 0.0;
              for (std::size_t i = 0; i < gr.size(); ++i) {
                const double r = std::hypot(zr[i], zi[i]);
                if (r == 0.0) {
                  g_alpha += eps * gr[i];
                  continue;
                }
                const double lin = -std::log(r) + c;
                const bool active = lin > eps;
                const double g = active ? lin : eps;
                const double dot = zr[i] * gr[i] + zi[i] * gi[i];
                g_alpha += g / r * dot;
                if (active) g_c += alpha / r * dot;
                if (need_z) {
                  // out = s(r)·z with s = α g / r; J = s I + (s'/r) z zᵀ.
                  const double s = alpha * g / r;
                  const double dg = active ? -1.0 / r : 0.0;
                  const double ds_over_r = alpha * (dg * r - g) / (r * r * r);
                  gz.re[i] += s * gr[i] + ds_over_r * dot * zr[i];
                  gz.im[i] += s * gi[i] + ds_over_r * dot * zi[i];
                }
              }
              if (alpha_t.requires_grad()) grad_buffers(alpha_t).re[0] += g_alpha;
              if (c_t.requires_grad()) grad_buffers(c_t).re[0] += g_c;
            });
  return out;
}

ComplexSpectrogram log_compress(const ComplexSpectrogram& spec,
                                const LogCompressParams& params) {
  return {log_compress(spec.data, params), spec.config, spec.phase_mode};
}

ComplexSpectrogram phase_ablate(const ComplexSpectrogram& spec, PhaseMode mode,
                                Rng& rng) {
  if (spec.phase_mode != PhaseMode::kFull)
    throw StateError(std::string("phase_ablate expects a full-phase spectrogram, got ") +
                     phase_mode_name(spec.phase_mode));
  if (mode == PhaseMode::kFull) return {spec.data.detach(), spec.config, mode};
  const std::size_t n = spec.data.size();
  const auto zr = spec.data.real(), zi = spec.data.imag();
  std::vector<double> re(n), im(n, 0.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = std::hypot(zr[i], zi[i]);
    if (mode == PhaseMode::kZero) {
      re[i] = r;
    } else {
      const double phi = angle(rng);
      re[i] = r * std::cos(phi);
      im[i] = r * std::sin(phi);
    }
  }
  return {ComplexTensor::from_planes(spec.data.shape(), std::move(re), std::move(im)),
          spec.config, mode};
}

void write_spectrogram_csv(const ComplexSpectrogram& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << "t,k,re,im\n";
  const std::size_t bins = spec.bins(), frames = spec.frames();
  const auto re = spec.data.real(), im = spec.data.imag();
  char buf[96];
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < bins; ++k) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g\n", t, k,
                    re[k * frames + t], im[k * frames + t]);
      out << buf;
    }
  }
  if (!out) throw FormatError("write failed for '" + path + "'");
}

}  // namespace ccqt::dsp
