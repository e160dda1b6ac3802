#include "ccqt/ctensor/tensor.hpp"

#include <cmath>

#include "ccqt/ctensor/autograd.hpp"
#include "ccqt/errors.hpp"

namespace ccqt {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

ComplexTensor ComplexTensor::zeros(Shape shape) {
  const auto n = numel(shape);
  return from_planes(std::move(shape), std::vector<double>(n, 0.0),
                     std::vector<double>(n, 0.0));
}

ComplexTensor ComplexTensor::from_planes(Shape shape, std::vector<double> re,
                                         std::vector<double> im) {
  const auto n = numel(shape);
  if (re.size() != n || im.size() != n)
    throw ShapeError("plane sizes " + std::to_string(re.size()) + "/" +
                     std::to_string(im.size()) + " do not match shape " +
                     shape_string(shape));
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->re = std::move(re);
  impl->im = std::move(im);
  return ComplexTensor(std::move(impl));
}

ComplexTensor ComplexTensor::from_real(Shape shape, std::vector<double> re) {
  std::vector<double> im(re.size(), 0.0);
  return from_planes(std::move(shape), std::move(re), std::move(im));
}

ComplexTensor ComplexTensor::from_complex(
    Shape shape, std::span<const std::complex<double>> v) {
  std::vector<double> re(v.size()), im(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    re[i] = v[i].real();
    im[i] = v[i].imag();
  }
  return from_planes(std::move(shape), std::move(re), std::move(im));
}

ComplexTensor ComplexTensor::scalar(std::complex<double> v) {
  return from_planes({1}, {v.real()}, {v.imag()});
}

const Shape& ComplexTensor::shape() const { return impl_->shape; }

std::size_t ComplexTensor::dim(std::size_t i) const {
  if (i >= impl_->shape.size())
    throw ShapeError("dimension index " + std::to_string(i) +
                     " out of range for shape " + shape_string(impl_->shape));
  return impl_->shape[i];
}

std::size_t ComplexTensor::size() const { return impl_->re.size(); }

std::span<const double> ComplexTensor::real() const { return impl_->re; }
std::span<const double> ComplexTensor::imag() const { return impl_->im; }

std::span<double> ComplexTensor::real_mut() {
  if (impl_->grad_fn) throw GraphError("cannot mutate an op output in place");
  return impl_->re;
}
std::span<double> ComplexTensor::imag_mut() {
  if (impl_->grad_fn) throw GraphError("cannot mutate an op output in place");
  return impl_->im;
}

std::complex<double> ComplexTensor::at(std::size_t flat) const {
  return {impl_->re.at(flat), impl_->im.at(flat)};
}

std::vector<std::complex<double>> ComplexTensor::to_complex() const {
  std::vector<std::complex<double>> out(size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = {impl_->re[i], impl_->im[i]};
  return out;
}

bool ComplexTensor::requires_grad() const { return impl_->requires_grad; }

ComplexTensor& ComplexTensor::set_requires_grad(bool on) {
  if (!on && impl_->grad_fn)
    throw GraphError("cannot disable grad on an op output; use detach()");
  impl_->requires_grad = on;
  return *this;
}

bool ComplexTensor::is_leaf() const { return impl_->grad_fn == nullptr; }

bool ComplexTensor::has_grad() const { return !impl_->grad_re.empty(); }

std::span<const double> ComplexTensor::grad_real() const {
  return impl_->grad_re;
}
std::span<const double> ComplexTensor::grad_imag() const {
  return impl_->grad_im;
}

void ComplexTensor::clear_grad() {
  impl_->grad_re.clear();
  impl_->grad_re.shrink_to_fit();
  impl_->grad_im.clear();
  impl_->grad_im.shrink_to_fit();
}

void ComplexTensor::zero_grad() {
  impl_->grad_re.assign(size(), 0.0);
  impl_->grad_im.assign(size(), 0.0);
}

ComplexTensor ComplexTensor::detach() const {
  return from_planes(impl_->shape, impl_->re, impl_->im);
}

ComplexTensor ComplexTensor::reshape(Shape shape) const {
  if (numel(shape) != size())
    throw ShapeError("cannot reshape " + shape_string(impl_->shape) + " to " +
                     shape_string(shape));
  auto out = from_planes(std::move(shape), impl_->re, impl_->im);
  const ComplexTensor src = *this;
  record_op(out, "reshape", {src},
            [src](std::span<const double> gr, std::span<const double> gi) {
              auto g = grad_buffers(src);
              for (std::size_t i = 0; i < gr.size(); ++i) {
                g.re[i] += gr[i];
                g.im[i] += gi[i];
              }
            });
  return out;
}

void ComplexTensor::check_finite(const std::string& what) const {
  for (std::size_t i = 0; i < size(); ++i) {
    if (!std::isfinite(impl_->re[i]) || !std::isfinite(impl_->im[i]))
      throw NonFiniteError(what + ": non-finite value at flat index " +
                           std::to_string(i));
  }
}

}  // namespace ccqt
