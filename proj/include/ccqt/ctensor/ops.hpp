#pragma once

#include "ccqt/ctensor/tensor.hpp"

namespace ccqt {

enum class ElementwiseOp { kAdd, kSub, kMul, kConj, kMagnitude, kScaleByReal };

// Generic entry point; `b` is required for the binary kinds and ignored for
// conj/magnitude. Binary kinds accept equal shapes or a single-element
// operand broadcast against the other.
ComplexTensor elementwise(ElementwiseOp op, const ComplexTensor& a,
                          const ComplexTensor& b = {});

ComplexTensor add(const ComplexTensor& a, const ComplexTensor& b);
ComplexTensor sub(const ComplexTensor& a, const ComplexTensor& b);
ComplexTensor mul(const ComplexTensor& a, const ComplexTensor& b);
ComplexTensor conj(const ComplexTensor& a);
// |a| as a real-valued tensor (imaginary plane zero). Gradient at 0 is 0.
ComplexTensor magnitude(const ComplexTensor& a);
// a · b for a real-valued b (imaginary plane must be exactly zero).
ComplexTensor scale_by_real(const ComplexTensor& a, const ComplexTensor& b);
ComplexTensor scale(const ComplexTensor& a, double s);

ComplexTensor real_part(const ComplexTensor& a);
ComplexTensor imag_part(const ComplexTensor& a);
ComplexTensor sum(const ComplexTensor& a);
ComplexTensor mean(const ComplexTensor& a);

// (m×k)·(k×n) complex matrix product.
ComplexTensor complex_matmul(const ComplexTensor& a, const ComplexTensor& b);

}  // namespace ccqt
