#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ccqt {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

class ComplexTensor;

namespace detail {

// Backward rule of a recorded op. Receives the gradient of the op output as
// (dL/dRe, dL/dIm) planes and accumulates into the op inputs.
using BackwardFn =
    std::function<void(std::span<const double>, std::span<const double>)>;

struct Node;

struct TensorImpl {
  Shape shape;
  std::vector<double> re;
  std::vector<double> im;
  bool requires_grad = false;
  std::vector<double> grad_re;  // empty until populated
  std::vector<double> grad_im;
  std::shared_ptr<Node> grad_fn;
};

struct Node {
  std::string name;
  std::vector<ComplexTensor> inputs;
  BackwardFn backward;
};

}  // namespace detail

// Dense N-dimensional complex array stored as separate real and imaginary
// planes (row-major). Copies share storage; use clone() for a deep copy.
//
// Gradients are kept as (dL/dRe, dL/dIm) pairs, which equals 2 dL/dz̄ split
// into components: the steepest-ascent direction of a real loss.
class ComplexTensor {
 public:
  ComplexTensor() = default;

  static ComplexTensor zeros(Shape shape);
  static ComplexTensor from_planes(Shape shape, std::vector<double> re,
                                   std::vector<double> im);
  static ComplexTensor from_real(Shape shape, std::vector<double> re);
  static ComplexTensor from_complex(Shape shape,
                                    std::span<const std::complex<double>> v);
  static ComplexTensor scalar(std::complex<double> v);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t i) const;
  std::size_t size() const;

  std::span<const double> real() const;
  std::span<const double> imag() const;
  // Mutable access is only allowed on tensors that are not op outputs.
  std::span<double> real_mut();
  std::span<double> imag_mut();
  std::complex<double> at(std::size_t flat) const;
  std::vector<std::complex<double>> to_complex() const;

  bool requires_grad() const;
  ComplexTensor& set_requires_grad(bool on);
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad_real() const;
  std::span<const double> grad_imag() const;
  void clear_grad();
  void zero_grad();

  // Same values, no graph history, independent storage.
  ComplexTensor detach() const;
  ComplexTensor clone() const { return detach(); }
  // Differentiable reshape; element count must match.
  ComplexTensor reshape(Shape shape) const;

  // Throws NonFiniteError naming `what` if any value is NaN or infinite.
  void check_finite(const std::string& what) const;

  detail::TensorImpl& impl() const { return *impl_; }
  bool same(const ComplexTensor& other) const { return impl_ == other.impl_; }

 private:
  explicit ComplexTensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}
  std::shared_ptr<detail::TensorImpl> impl_;
};

}  // namespace ccqt
