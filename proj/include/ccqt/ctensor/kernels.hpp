#pragma once

#include <cstddef>
#include <span>

namespace ccqt::kernels {

// Row-major complex matrix view over split planes.
struct CMatView {
  const double* re;
  const double* im;
  std::size_t rows;
  std::size_t cols;
};

struct CMatMut {
  double* re;
  double* im;
  std::size_t rows;
  std::size_t cols;
};

enum class Form { kPlain, kConjTranspose };

// C = op(A) · op(B), or C += ... when `accumulate`. Shapes refer to the
// stored matrices; op() is applied before the product. Built on real GEMMs:
// the 3-multiply form for plain products with a long inner dimension, four
// in-place products otherwise.
void cgemm(const CMatView& a, Form fa, const CMatView& b, Form fb,
           const CMatMut& c, bool accumulate);

}  // namespace ccqt::kernels
