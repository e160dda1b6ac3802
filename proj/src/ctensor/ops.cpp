#include "ccqt/ctensor/ops.hpp"

#include <cmath>

#include "ccqt/ctensor/autograd.hpp"
#include "ccqt/ctensor/kernels.hpp"
#include "ccqt/errors.hpp"

namespace ccqt {

namespace {

const char* op_name(ElementwiseOp op) {
  switch (op) {
    case ElementwiseOp::kAdd: return "add";
    case ElementwiseOp::kSub: return "sub";
    case ElementwiseOp::kMul: return "mul";
    case ElementwiseOp::kConj: return "conj";
    case ElementwiseOp::kMagnitude: return "magnitude";
    case ElementwiseOp::kScaleByReal: return "scale_by_real";
  }
  return "?";
}

// Output shape for a binary op with single-element broadcast.
Shape broadcast_shape(const ComplexTensor& a, const ComplexTensor& b,
                      const char* name) {
  if (a.shape() == b.shape()) return a.shape();
  if (b.size() == 1) return a.shape();
  if (a.size() == 1) return b.shape();
  throw ShapeError(std::string(name) + ": shape mismatch " +
                   shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

ComplexTensor binary(ElementwiseOp op, const ComplexTensor& a,
                     const ComplexTensor& b) {
  const char* name = op_name(op);
  if (!b.defined()) throw ShapeError(std::string(name) + ": missing operand");
  if (op == ElementwiseOp::kScaleByReal) {
    for (double v : b.imag())
      if (v != 0.0)
        throw ShapeError("scale_by_real: scale tensor has nonzero imaginary part");
  }
  const Shape shape = broadcast_shape(a, b, name);
  const std::size_t n = numel(shape);
  const bool sa = a.size() == 1 && n != 1;
  const bool sb = b.size() == 1 && n != 1;
  std::vector<double> re(n), im(n);
  const auto ar = a.real(), ai = a.imag(), br = b.real(), bi = b.imag();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ia = sa ? 0 : i, ib = sb ? 0 : i;
    switch (op) {
      case ElementwiseOp::kAdd:
        re[i] = ar[ia] + br[ib];
        im[i] = ai[ia] + bi[ib];
        break;
      case ElementwiseOp::kSub:
        re[i] = ar[ia] - br[ib];
        im[i] = ai[ia] - bi[ib];
        break;
      case ElementwiseOp::kMul:
        re[i] = ar[ia] * br[ib] - ai[ia] * bi[ib];
        im[i] = ar[ia] * bi[ib] + ai[ia] * br[ib];
        break;
      case ElementwiseOp::kScaleByReal:
        re[i] = ar[ia] * br[ib];
        im[i] = ai[ia] * br[ib];
        break;
      default:
        break;
    }
  }
  auto out = ComplexTensor::from_planes(shape, std::move(re), std::move(im));
  out.check_finite(name);
  record_op(out, name, {a, b},
            [op, a, b, sa, sb](std::span<const double> gr,
                               std::span<const double> gi) {
              const auto ar = a.real(), ai = a.imag(), br = b.real(),
                         bi = b.imag();
              const bool need_a = a.requires_grad(), need_b = b.requires_grad();
              GradPlanes ga{}, gb{};
              if (need_a) ga = grad_buffers(a);
              if (need_b) gb = grad_buffers(b);
              for (std::size_t i = 0; i < gr.size(); ++i) {
                const std::size_t ia = sa ? 0 : i, ib = sb ? 0 : i;
                switch (op) {
                  case ElementwiseOp::kAdd:
                  case ElementwiseOp::kSub: {
                    const double s = op == ElementwiseOp::kSub ? -1.0 : 1.0;
                    if (need_a) {
                      ga.re[ia] += gr[i];
                      ga.im[ia] += gi[i];
                    }
                    if (need_b) {
                      gb.re[ib] += s * gr[i];
                      gb.im[ib] += s * gi[i];
                    }
                    break;
                  }
                  case ElementwiseOp::kMul:
                    // conj(other) · g
                    if (need_a) {
                      ga.re[ia] += br[ib] * gr[i] + bi[ib] * gi[i];
                      ga.im[ia] += br[ib] * gi[i] - bi[ib] * gr[i];
                    }
                    if (need_b) {
                      gb.re[ib] += ar[ia] * gr[i] + ai[ia] * gi[i];
                      gb.im[ib] += ar[ia] * gi[i] - ai[ia] * gr[i];
                    }
                    break;
                  case ElementwiseOp::kScaleByReal:
                    if (need_a) {
                      ga.re[ia] += br[ib] * gr[i];
                      ga.im[ia] += br[ib] * gi[i];
                    }
                    if (need_b) gb.re[ib] += ar[ia] * gr[i] + ai[ia] * gi[i];
                    break;
                  default:
                    break;
                }
              }
            });
  return out;
}

}  // namespace

ComplexTensor elementwise(ElementwiseOp op, const ComplexTensor& a,
                          const ComplexTensor& b) {
  switch (op) {
    case ElementwiseOp::kConj: return conj(a);
    case ElementwiseOp::kMagnitude: return magnitude(a);
    default: return binary(op, a, b);
  }
}

ComplexTensor add(const ComplexTensor& a, const ComplexTensor& b) {
  return binary(ElementwiseOp::kAdd, a, b);
}
ComplexTensor sub(const ComplexTensor& a, const ComplexTensor& b) {
  return binary(ElementwiseOp::kSub, a, b);
}
ComplexTensor mul(const ComplexTensor& a, const ComplexTensor& b) {
  return binary(ElementwiseOp::kMul, a, b);
}
ComplexTensor scale_by_real(const ComplexTensor& a, const ComplexTensor& b) {
  return binary(ElementwiseOp::kScaleByReal, a, b);
}

ComplexTensor conj(const ComplexTensor& a) {
  std::vector<double> re(a.real().begin(), a.real().end());
  std::vector<double> im(a.size());
  const auto ai = a.imag();
  for (std::size_t i = 0; i < im.size(); ++i) im[i] = -ai[i];
  auto out = ComplexTensor::from_planes(a.shape(), std::move(re), std::move(im));
  record_op(out, "conj", {a},
            [a](std::span<const double> gr, std::span<const double> gi) {
              auto g = grad_buffers(a);
              for (std::size_t i = 0; i < gr.size(); ++i) {
                g.re[i] += gr[i];
                g.im[i] -= gi[i];
              }
            });
  return out;
}

ComplexTensor magnitude(const ComplexTensor& a) {
  std::vector<double> re(a.size());
  const auto ar = a.real(), ai = a.imag();
  for (std::size_t i = 0; i < re.size(); ++i) re[i] = std::hypot(ar[i], ai[i]);
  auto out = ComplexTensor::from_real(a.shape(), std::move(re));
  out.check_finite("magnitude");
  const ComplexTensor mag = out.detach();
  record_op(out, "magnitude", {a},
            [a, mag](std::span<const double> gr, std::span<const double>) {
              auto g = grad_buffers(a);
              const auto ar = a.real(), ai = a.imag(), m = mag.real();
              for (std::size_t i = 0; i < gr.size(); ++i) {
                if (m[i] == 0.0) continue;
                g.re[i] += gr[i] * ar[i] / m[i];
                g.im[i] += gr[i] * ai[i] / m[i];
              }
            });
  return out;
}

ComplexTensor scale(const ComplexTensor& a, double s) {
  std::vector<double> re(a.size()), im(a.size());
  const auto ar = a.real(), ai = a.imag();
  for (std::size_t i = 0; i < re.size(); ++i) {
    re[i] = s * ar[i];
    im[i] = s * ai[i];
  }
  auto out = ComplexTensor::from_planes(a.shape(), std::move(re), std::move(im));
  out.check_finite("scale");
  record_op(out, "scale", {a},
            [a, s](std::span<const double> gr, std::span<const double> gi) {
              auto g = grad_buffers(a);
              for (std::size_t i = 0; i < gr.size(); ++i) {
                g.re[i] += s * gr[i];
                g.im[i] += s * gi[i];
              }
            });
  return out;
}

ComplexTensor real_part(const ComplexTensor& a) {
  auto out = ComplexTensor::from_real(
      a.shape(), std::vector<double>(a.real().begin(), a.real().end()));
  record_op(out, "real_part", {a},
            [a](std::span<const double> gr, std::span<const double>) {
              auto g = grad_buffers(a);
              for (std::size_t i = 0; i < gr.size(); ++i) g.re[i] += gr[i];
            });
  return out;
}

ComplexTensor imag_part(const ComplexTensor& a) {
  auto out = ComplexTensor::from_real(
      a.shape(), std::vector<double>(a.imag().begin(), a.imag().end()));
  record_op(out, "imag_part", {a},
            [a](std::span<const double> gr, std::span<const double>) {
              auto g = grad_buffers(a);
              for (std::size_t i = 0; i < gr.size(); ++i) g.im[i] += gr[i];
            });
  return out;
}

ComplexTensor sum(const ComplexTensor& a) {
  double sr = 0.0, si = 0.0;
  for (double v : a.real()) sr += v;
  for (double v : a.imag()) si += v;
  auto out = ComplexTensor::scalar({sr, si});
  out.check_finite("sum");
  record_op(out, "sum", {a},
            [a](std::span<const double> gr, std::span<const double> gi) {
              auto g = grad_buffers(a);
              for (std::size_t i = 0; i < g.re.size(); ++i) {
                g.re[i] += gr[0];
                g.im[i] += gi[0];
              }
            });
  return out;
}

ComplexTensor mean(const ComplexTensor& a) {
  if (a.size() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

ComplexTensor complex_matmul(const ComplexTensor& a, const ComplexTensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw ShapeError("complex_matmul expects rank-2 operands, got " +
                     shape_string(a.shape()) + " and " + shape_string(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw ShapeError("complex_matmul inner dimensions differ: " +
                     shape_string(a.shape()) + " · " + shape_string(b.shape()));
  auto out = ComplexTensor::zeros({m, n});
  auto& oi = out.impl();
  kernels::cgemm({a.real().data(), a.imag().data(), m, k}, kernels::Form::kPlain,
                 {b.real().data(), b.imag().data(), k, n}, kernels::Form::kPlain,
                 {oi.re.data(), oi.im.data(), m, n}, false);
  out.check_finite("complex_matmul");
  record_op(out, "complex_matmul", {a, b},
            [a, b, m, k, n](std::span<const double> gr,
                            std::span<const double> gi) {
              const kernels::CMatView g{gr.data(), gi.data(), m, n};
              if (a.requires_grad()) {
                auto ga = grad_buffers(a);
                kernels::cgemm(g, kernels::Form::kPlain,
                               {b.real().data(), b.imag().data(), k, n},
                               kernels::Form::kConjTranspose,
                               {ga.re.data(), ga.im.data(), m, k}, true);
              }
              if (b.requires_grad()) {
                auto gb = grad_buffers(b);
                kernels::cgemm({a.real().data(), a.imag().data(), m, k},
                               kernels::Form::kConjTranspose, g,
                               kernels::Form::kPlain,
                               {gb.re.data(), gb.im.data(), k, n}, true);
              }
            });
  return out;
}

}  // namespace ccqt
