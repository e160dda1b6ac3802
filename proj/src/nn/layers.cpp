#include "ccqt/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "ccqt/ctensor/autograd.hpp"
#include "ccqt/ctensor/kernels.hpp"
#include "ccqt/errors.hpp"

namespace ccqt::nn {

namespace {

using kernels::CMatMut;
using kernels::CMatView;
using kernels::Form;

struct ConvGeometry {
  std::size_t batch, cin, h, w;
  std::size_t cout, kh, kw;
  std::size_t stride, padding;
  std::size_t oh, ow;

  std::size_t k() const { return cin * kh * kw; }
  std::size_t p() const { return oh * ow; }
};

// Patch matrix (K × P) of sample b, zero where the window hangs over the
// padding.
void im2col(const ConvGeometry& g, const double* x, double* col) {
  std::size_t row = 0;
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    const double* plane = x + ci * g.h * g.w;
    for (std::size_t dy = 0; dy < g.kh; ++dy) {
      for (std::size_t dx = 0; dx < g.kw; ++dx, ++row) {
        double* out = col + row * g.p();
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + dy) -
                          static_cast<std::ptrdiff_t>(g.padding);
          double* dst = out + oy * g.ow;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill(dst, dst + g.ow, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * g.w;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + dx) -
                            static_cast<std::ptrdiff_t>(g.padding);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w))
                          ? 0.0
                          : src[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const double* col, double* x) {
  std::size_t row = 0;
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    double* plane = x + ci * g.h * g.w;
    for (std::size_t dy = 0; dy < g.kh; ++dy) {
      for (std::size_t dx = 0; dx < g.kw; ++dx, ++row) {
        const double* in = col + row * g.p();
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + dy) -
                          static_cast<std::ptrdiff_t>(g.padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          double* dst = plane + static_cast<std::size_t>(iy) * g.w;
          const double* src = in + oy * g.ow;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + dx) -
                            static_cast<std::ptrdiff_t>(g.padding);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w))
              dst[static_cast<std::size_t>(ix)] += src[ox];
          }
        }
      }
    }
  }
}

void require_rank(const ComplexTensor& t, std::size_t rank, const char* what) {
  if (!t.defined() || t.rank() != rank)
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) +
                     ", got " + (t.defined() ? shape_string(t.shape()) : "undefined"));
}

}  // namespace

ComplexTensor crelu(const ComplexTensor& x) {
  const std::size_t n = x.size();
  std::vector<double> re(n), im(n);
  const auto xr = x.real(), xi = x.imag();
  for (std::size_t i = 0; i < n; ++i) {
    re[i] = xr[i] > 0.0 ? xr[i] : 0.0;
    im[i] = xi[i] > 0.0 ? xi[i] : 0.0;
  }
  auto out = ComplexTensor::from_planes(x.shape(), std::move(re), std::move(im));
  record_op(out, "crelu", {x}, [x](std::span<const double> gr, std::span<const double> gi) {
    auto gx = grad_buffers(x);
    const auto xr = x.real(), xi = x.imag();
    for (std::size_t i = 0; i < gr.size(); ++i) {
      if (xr[i] > 0.0) gx.re[i] += gr[i];
      if (xi[i] > 0.0) gx.im[i] += gi[i];
    }
  });
  return out;
}

ComplexTensor complex_conv2d(const ComplexTensor& x, const ComplexTensor& w,
                             const ComplexTensor& bias, std::size_t stride,
                             std::size_t padding) {
  require_rank(x, 4, "complex_conv2d input");
  require_rank(w, 4, "complex_conv2d weight");
  require_rank(bias, 1, "complex_conv2d bias");
  if (stride == 0) throw ShapeError("complex_conv2d: stride must be positive");
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), w.dim(3),
                 stride,    padding,  0,        0};
  if (w.dim(1) != g.cin)
    throw ShapeError("complex_conv2d: input has " + std::to_string(g.cin) +
                     " channels, weight expects " + std::to_string(w.dim(1)));
  if (bias.dim(0) != g.cout)
    throw ShapeError("complex_conv2d: bias length " + std::to_string(bias.dim(0)) +
                     " != output channels " + std::to_string(g.cout));
  if (g.h + 2 * padding < g.kh || g.w + 2 * padding < g.kw)
    throw ShapeError("complex_conv2d: input " + shape_string(x.shape()) +
                     " smaller than the kernel");
  g.oh = (g.h + 2 * padding - g.kh) / stride + 1;
  g.ow = (g.w + 2 * padding - g.kw) / stride + 1;

  const std::size_t K = g.k(), P = g.p(), in_step = g.cin * g.h * g.w,
                    out_step = g.cout * P;
  auto out = ComplexTensor::zeros({g.batch, g.cout, g.oh, g.ow});
  auto& oi = out.impl();
  std::vector<double> col_re(K * P), col_im(K * P);
  const CMatView wv{w.real().data(), w.imag().data(), g.cout, K};
  for (std::size_t b = 0; b < g.batch; ++b) {
    im2col(g, x.real().data() + b * in_step, col_re.data());
    im2col(g, x.imag().data() + b * in_step, col_im.data());
    double* o_re = oi.re.data() + b * out_step;
    double* o_im = oi.im.data() + b * out_step;
    kernels::cgemm(wv, Form::kPlain, {col_re.data(), col_im.data(), K, P}, Form::kPlain,
                   {o_re, o_im, g.cout, P}, false);
    for (std::size_t c = 0; c < g.cout; ++c) {
      const double br = bias.real()[c], bi = bias.imag()[c];
      for (std::size_t p = 0; p < P; ++p) {
        o_re[c * P + p] += br;
        o_im[c * P + p] += bi;
      }
    }
  }
  out.check_finite("complex_conv2d");
  record_op(out, "complex_conv2d", {x, w, bias},
            [x, w, bias, g](std::span<const double> gr, std::span<const double> gi) {
              const std::size_t K = g.k(), P = g.p(), in_step = g.cin * g.h * g.w,
                                out_step = g.cout * P;
              const bool need_x = x.requires_grad(), need_w = w.requires_grad();
              std::vector<double> col_re(K * P), col_im(K * P);
              const CMatView wv{w.real().data(), w.imag().data(), g.cout, K};
              for (std::size_t b = 0; b < g.batch; ++b) {
                const CMatView gv{gr.data() + b * out_step, gi.data() + b * out_step,
                                  g.cout, P};
                if (need_w) {
                  im2col(g, x.real().data() + b * in_step, col_re.data());
                  im2col(g, x.imag().data() + b * in_step, col_im.data());
                  auto gw = grad_buffers(w);
                  kernels::cgemm(gv, Form::kPlain, {col_re.data(), col_im.data(), K, P},
                                 Form::kConjTranspose,
                                 {gw.re.data(), gw.im.data(), g.cout, K}, true);
                }
                if (need_x) {
                  kernels::cgemm(wv, Form::kConjTranspose, gv, Form::kPlain,
                                 {col_re.data(), col_im.data(), K, P}, false);
                  auto gx = grad_buffers(x);
                  col2im_add(g, col_re.data(), gx.re.data() + b * in_step);
                  col2im_add(g, col_im.data(), gx.im.data() + b * in_step);
                }
              }
              if (bias.requires_grad()) {
                auto gb = grad_buffers(bias);
                for (std::size_t b = 0; b < g.batch; ++b)
                  for (std::size_t c = 0; c < g.cout; ++c)
                    for (std::size_t p = 0; p < P; ++p) {
                      gb.re[c] += gr[b * out_step + c * P + p];
                      gb.im[c] += gi[b * out_step + c * P + p];
                    }
              }
            });
  return out;
}

BatchNormState BatchNormState::make(std::size_t channels, double momentum, double eps) {
  BatchNormState s;
  s.gamma = ComplexTensor::from_real({channels}, std::vector<double>(channels, 1.0));
  s.beta = ComplexTensor::zeros({channels});
  s.gamma.set_requires_grad(true);
  s.beta.set_requires_grad(true);
  s.running_mean.assign(channels, 0.0);
  s.running_var.assign(channels, 1.0);
  s.momentum = momentum;
  s.eps = eps;
  return s;
}

ComplexTensor complex_batchnorm(const ComplexTensor& x, BatchNormState& state, Mode mode,
                                bool update_stats) {
  if (!x.defined() || x.rank() < 2)
    throw ShapeError("complex_batchnorm: expected (B, C, ...) input");
  const std::size_t B = x.dim(0), C = x.dim(1), S = x.size() / (B * C);
  if (C != state.channels() || state.gamma.size() != C || state.beta.size() != C)
    throw ShapeError("complex_batchnorm: input has " + std::to_string(C) +
                     " channels, state has " + std::to_string(state.channels()));
  const std::size_t M = B * S;
  std::vector<std::complex<double>> mu(C);
  std::vector<double> inv_s(C);
  const auto xr = x.real(), xi = x.imag();
  if (mode == Mode::kTrain) {
    if (M < 2)
      throw ShapeError("complex_batchnorm: need at least 2 values per channel in training mode");
    for (std::size_t c = 0; c < C; ++c) {
      double sr = 0.0, si = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const std::size_t base = (b * C + c) * S;
        for (std::size_t s = 0; s < S; ++s) {
          sr += xr[base + s];
          si += xi[base + s];
        }
      }
      mu[c] = {sr / static_cast<double>(M), si / static_cast<double>(M)};
      double v = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const std::size_t base = (b * C + c) * S;
        for (std::size_t s = 0; s < S; ++s) {
          const double dr = xr[base + s] - mu[c].real(), di = xi[base + s] - mu[c].imag();
          v += dr * dr + di * di;
        }
      }
      v /= static_cast<double>(M);
      inv_s[c] = 1.0 / std::sqrt(v + state.eps);
      if (update_stats) {
        const double m = state.momentum;
        state.running_mean[c] = (1.0 - m) * state.running_mean[c] + m * mu[c];
        state.running_var[c] = (1.0 - m) * state.running_var[c] + m * v;
      }
    }
    if (update_stats) state.has_stats = true;
  } else {
    if (!state.has_stats)
      throw StateError("complex_batchnorm: eval mode before any running statistics exist");
    for (std::size_t c = 0; c < C; ++c) {
      mu[c] = state.running_mean[c];
      inv_s[c] = 1.0 / std::sqrt(state.running_var[c] + state.eps);
    }
  }

  // Normalized values are kept for the backward pass.
  std::vector<double> nr(x.size()), ni(x.size()), yr(x.size()), yi(x.size());
  const auto gmr = state.gamma.real(), gmi = state.gamma.imag();
  const auto btr = state.beta.real(), bti = state.beta.imag();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t base = (b * C + c) * S;
      for (std::size_t s = 0; s < S; ++s) {
        const double ur = (xr[base + s] - mu[c].real()) * inv_s[c];
        const double ui = (xi[base + s] - mu[c].imag()) * inv_s[c];
        nr[base + s] = ur;
        ni[base + s] = ui;
        yr[base + s] = gmr[c] * ur - gmi[c] * ui + btr[c];
        yi[base + s] = gmr[c] * ui + gmi[c] * ur + bti[c];
      }
    }
  auto out = ComplexTensor::from_planes(x.shape(), std::move(yr), std::move(yi));
  out.check_finite("complex_batchnorm");
  const bool batch_stats = mode == Mode::kTrain;
  auto gamma = state.gamma;
  auto beta = state.beta;
  record_op(
      out, "complex_batchnorm", {x, gamma, beta},
      [x, gamma, beta, B, C, S, M, batch_stats, inv_s, nr = std::move(nr),
       ni = std::move(ni)](std::span<const double> gr, std::span<const double> gi) {
        const auto gmr = gamma.real(), gmi = gamma.imag();
        if (gamma.requires_grad() || beta.requires_grad()) {
          auto gg = grad_buffers(gamma);
          auto gb = grad_buffers(beta);
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t c = 0; c < C; ++c) {
              const std::size_t base = (b * C + c) * S;
              for (std::size_t s = 0; s < S; ++s) {
                const std::size_t i = base + s;
                // conj(n)·G
                gg.re[c] += nr[i] * gr[i] + ni[i] * gi[i];
                gg.im[c] += nr[i] * gi[i] - ni[i] * gr[i];
                gb.re[c] += gr[i];
                gb.im[c] += gi[i];
              }
            }
        }
        if (!x.requires_grad()) return;
        auto gx = grad_buffers(x);
        std::vector<double> hr(S), hi(S);
        for (std::size_t c = 0; c < C; ++c) {
          // G_n = conj(γ)·G, then through n = u/s and the centering.
          double dot = 0.0, mr = 0.0, mi = 0.0;
          if (batch_stats) {
            for (std::size_t b = 0; b < B; ++b) {
              const std::size_t base = (b * C + c) * S;
              for (std::size_t s = 0; s < S; ++s) {
                const std::size_t i = base + s;
                const double hnr = gmr[c] * gr[i] + gmi[c] * gi[i];
                const double hni = gmr[c] * gi[i] - gmi[c] * gr[i];
                dot += hnr * nr[i] + hni * ni[i];
                mr += hnr;
                mi += hni;
              }
            }
            dot /= static_cast<double>(M);
            mr /= static_cast<double>(M);
            mi /= static_cast<double>(M);
          }
          for (std::size_t b = 0; b < B; ++b) {
            const std::size_t base = (b * C + c) * S;
            for (std::size_t s = 0; s < S; ++s) {
              const std::size_t i = base + s;
              const double hnr = gmr[c] * gr[i] + gmi[c] * gi[i];
              const double hni = gmr[c] * gi[i] - gmi[c] * gr[i];
              if (batch_stats) {
                gx.re[i] += inv_s[c] * (hnr - mr - dot * nr[i]);
                gx.im[i] += inv_s[c] * (hni - mi - dot * ni[i]);
              } else {
                gx.re[i] += inv_s[c] * hnr;
                gx.im[i] += inv_s[c] * hni;
              }
            }
          }
        }
      });
  return out;
}

ComplexTensor complex_dropout(const ComplexTensor& x, double p, Mode mode, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0))
    throw ConfigError("complex_dropout: p must lie in [0, 1), got " + std::to_string(p));
  if (mode == Mode::kEval || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t n = x.size();
  std::vector<double> mask(n);
  for (auto& m : mask) m = u(rng) >= p ? keep_scale : 0.0;
  std::vector<double> re(n), im(n);
  const auto xr = x.real(), xi = x.imag();
  for (std::size_t i = 0; i < n; ++i) {
    re[i] = xr[i] * mask[i];
    im[i] = xi[i] * mask[i];
  }
  auto out = ComplexTensor::from_planes(x.shape(), std::move(re), std::move(im));
  record_op(out, "complex_dropout", {x},
            [x, mask = std::move(mask)](std::span<const double> gr,
                                        std::span<const double> gi) {
              auto gx = grad_buffers(x);
              for (std::size_t i = 0; i < mask.size(); ++i) {
                gx.re[i] += mask[i] * gr[i];
                gx.im[i] += mask[i] * gi[i];
              }
            });
  return out;
}

ComplexTensor linear_positionwise(const ComplexTensor& x, const ComplexTensor& w,
                                  const ComplexTensor& bias) {
  require_rank(x, 3, "linear_positionwise input");
  require_rank(w, 2, "linear_positionwise weight");
  require_rank(bias, 1, "linear_positionwise bias");
  const std::size_t B = x.dim(0), cin = x.dim(1), T = x.dim(2), cout = w.dim(0);
  if (w.dim(1) != cin)
    throw ShapeError("linear_positionwise: input has " + std::to_string(cin) +
                     " features, weight expects " + std::to_string(w.dim(1)));
  if (bias.dim(0) != cout)
    throw ShapeError("linear_positionwise: bias length " + std::to_string(bias.dim(0)) +
                     " != output width " + std::to_string(cout));
  auto out = ComplexTensor::zeros({B, cout, T});
  auto& oi = out.impl();
  const CMatView wv{w.real().data(), w.imag().data(), cout, cin};
  for (std::size_t b = 0; b < B; ++b) {
    double* o_re = oi.re.data() + b * cout * T;
    double* o_im = oi.im.data() + b * cout * T;
    kernels::cgemm(wv, Form::kPlain,
                   {x.real().data() + b * cin * T, x.imag().data() + b * cin * T, cin, T},
                   Form::kPlain, {o_re, o_im, cout, T}, false);
    for (std::size_t c = 0; c < cout; ++c)
      for (std::size_t t = 0; t < T; ++t) {
        o_re[c * T + t] += bias.real()[c];
        o_im[c * T + t] += bias.imag()[c];
      }
  }
  out.check_finite("linear_positionwise");
  record_op(out, "linear_positionwise", {x, w, bias},
            [x, w, bias, B, cin, T, cout](std::span<const double> gr,
                                          std::span<const double> gi) {
              const CMatView wv{w.real().data(), w.imag().data(), cout, cin};
              for (std::size_t b = 0; b < B; ++b) {
                const CMatView gv{gr.data() + b * cout * T, gi.data() + b * cout * T,
                                  cout, T};
                if (w.requires_grad()) {
                  auto gw = grad_buffers(w);
                  kernels::cgemm(gv, Form::kPlain,
                                 {x.real().data() + b * cin * T,
                                  x.imag().data() + b * cin * T, cin, T},
                                 Form::kConjTranspose, {gw.re.data(), gw.im.data(), cout, cin},
                                 true);
                }
                if (x.requires_grad()) {
                  auto gx = grad_buffers(x);
                  kernels::cgemm(wv, Form::kConjTranspose, gv, Form::kPlain,
                                 {gx.re.data() + b * cin * T, gx.im.data() + b * cin * T,
                                  cin, T},
                                 true);
                }
              }
              if (bias.requires_grad()) {
                auto gb = grad_buffers(bias);
                for (std::size_t b = 0; b < B; ++b)
                  for (std::size_t c = 0; c < cout; ++c)
                    for (std::size_t t = 0; t < T; ++t) {
                      gb.re[c] += gr[(b * cout + c) * T + t];
                      gb.im[c] += gi[(b * cout + c) * T + t];
                    }
              }
            });
  return out;
}

ComplexTensor time_mean(const ComplexTensor& x) {
  require_rank(x, 3, "time_mean");
  const std::size_t rows = x.dim(0) * x.dim(1), T = x.dim(2);
  if (T == 0) throw ShapeError("time_mean: empty time axis");
  std::vector<double> re(rows), im(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double sr = 0.0, si = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      sr += x.real()[r * T + t];
      si += x.imag()[r * T + t];
    }
    re[r] = sr / static_cast<double>(T);
    im[r] = si / static_cast<double>(T);
  }
  auto out = ComplexTensor::from_planes({x.dim(0), x.dim(1)}, std::move(re), std::move(im));
  record_op(out, "time_mean", {x},
            [x, rows, T](std::span<const double> gr, std::span<const double> gi) {
              auto gx = grad_buffers(x);
              const double inv = 1.0 / static_cast<double>(T);
              for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t t = 0; t < T; ++t) {
                  gx.re[r * T + t] += gr[r] * inv;
                  gx.im[r * T + t] += gi[r] * inv;
                }
            });
  return out;
}

ComplexTensor time_magmax(const ComplexTensor& x) {
  require_rank(x, 3, "time_magmax");
  const std::size_t rows = x.dim(0) * x.dim(1), T = x.dim(2);
  if (T == 0) throw ShapeError("time_magmax: empty time axis");
  std::vector<std::size_t> pick(rows);
  std::vector<double> re(rows), im(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    double best_mag = -1.0;
    for (std::size_t t = 0; t < T; ++t) {
      const double m = std::hypot(x.real()[r * T + t], x.imag()[r * T + t]);
      if (m > best_mag) {
        best_mag = m;
        best = t;
      }
    }
    pick[r] = r * T + best;
    re[r] = x.real()[pick[r]];
    im[r] = x.imag()[pick[r]];
  }
  auto out = ComplexTensor::from_planes({x.dim(0), x.dim(1)}, std::move(re), std::move(im));
  record_op(out, "time_magmax", {x},
            [x, pick = std::move(pick)](std::span<const double> gr,
                                        std::span<const double> gi) {
              auto gx = grad_buffers(x);
              for (std::size_t r = 0; r < pick.size(); ++r) {
                gx.re[pick[r]] += gr[r];
                gx.im[pick[r]] += gi[r];
              }
            });
  return out;
}

ComplexTensor magnitude_softmax(const ComplexTensor& z) {
  require_rank(z, 2, "magnitude_softmax");
  const std::size_t B = z.dim(0), K = z.dim(1);
  if (K == 0) throw ShapeError("magnitude_softmax: no classes");
  std::vector<double> r(z.size()), p(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) r[i] = std::hypot(z.real()[i], z.imag()[i]);
  for (std::size_t b = 0; b < B; ++b) {
    const double top = *std::max_element(r.begin() + b * K, r.begin() + (b + 1) * K);
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) total += p[b * K + k] = std::exp(r[b * K + k] - top);
    for (std::size_t k = 0; k < K; ++k) p[b * K + k] /= total;
  }
  auto out = ComplexTensor::from_real(z.shape(), p);
  out.check_finite("magnitude_softmax");
  record_op(out, "magnitude_softmax", {z},
            [z, B, K, r = std::move(r), p = std::move(p)](std::span<const double> gr,
                                                          std::span<const double>) {
              auto gz = grad_buffers(z);
              for (std::size_t b = 0; b < B; ++b) {
                double dot = 0.0;
                for (std::size_t k = 0; k < K; ++k) dot += p[b * K + k] * gr[b * K + k];
                for (std::size_t k = 0; k < K; ++k) {
                  const std::size_t i = b * K + k;
                  if (r[i] == 0.0) continue;
                  const double dr = p[i] * (gr[i] - dot) / r[i];
                  gz.re[i] += dr * z.real()[i];
                  gz.im[i] += dr * z.imag()[i];
                }
              }
            });
  return out;
}

ComplexTensor cross_entropy(const ComplexTensor& logits, const std::vector<int>& labels) {
  require_rank(logits, 2, "cross_entropy");
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  if (labels.size() != B)
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                     std::to_string(B));
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= K)
      throw ShapeError("cross_entropy: label " + std::to_string(y) + " out of range");
  std::vector<double> r(logits.size()), p(logits.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    r[i] = std::hypot(logits.real()[i], logits.imag()[i]);
  for (std::size_t b = 0; b < B; ++b) {
    const double top = *std::max_element(r.begin() + b * K, r.begin() + (b + 1) * K);
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) total += p[b * K + k] = std::exp(r[b * K + k] - top);
    for (std::size_t k = 0; k < K; ++k) p[b * K + k] /= total;
    loss += top + std::log(total) - r[b * K + static_cast<std::size_t>(labels[b])];
  }
  loss /= static_cast<double>(B);
  auto out = ComplexTensor::from_real({1}, {loss});
  out.check_finite("cross_entropy");
  record_op(out, "cross_entropy", {logits},
            [logits, labels, B, K, r = std::move(r), p = std::move(p)](
                std::span<const double> gr, std::span<const double>) {
              auto gz = grad_buffers(logits);
              const double seed = gr[0] / static_cast<double>(B);
              for (std::size_t b = 0; b < B; ++b)
                for (std::size_t k = 0; k < K; ++k) {
                  const std::size_t i = b * K + k;
                  if (r[i] == 0.0) continue;
                  const double target = static_cast<std::size_t>(labels[b]) == k ? 1.0 : 0.0;
                  const double dr = seed * (p[i] - target) / r[i];
                  gz.re[i] += dr * logits.real()[i];
                  gz.im[i] += dr * logits.imag()[i];
                }
            });
  return out;
}

ComplexTensor fold_frequency(const ComplexTensor& x) {
  require_rank(x, 4, "fold_frequency");
  return x.reshape({x.dim(0), x.dim(1) * x.dim(2), x.dim(3)});
}

}  // namespace ccqt::nn
