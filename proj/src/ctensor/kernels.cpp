#include "ccqt/ctensor/kernels.hpp"

#include <Eigen/Dense>

#include "ccqt/errors.hpp"

namespace ccqt::kernels {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

// A = ar + i·sa·ai, B = br + i·sb·bi:
//   P1 = ar·br, P2 = sa·sb·ai·bi, P3 = (ar + sa·ai)(br + sb·bi)
//   Re = P1 − P2, Im = P3 − P1 − P2
template <class EA, class EB>
void product_3m(const EA& ar, const EA& ai, double sa, const EB& br,
                const EB& bi, double sb, const CMatMut& c, bool accumulate) {
  RowMat p1 = ar * br;
  RowMat p2 = ai * bi;
  if (sa * sb < 0) p2 = -p2;
  RowMat asum = ar + sa * ai;
  RowMat bsum = br + sb * bi;
  RowMat p3 = asum * bsum;
  MutMap cr(c.re, c.rows, c.cols);
  MutMap ci(c.im, c.rows, c.cols);
  if (accumulate) {
    cr += p1 - p2;
    ci += p3 - p1 - p2;
  } else {
    cr = p1 - p2;
    ci = p3 - p1 - p2;
  }
}

// Four real products accumulated in place: no temporaries, which wins when
// the inner dimension is short or an operand is transposed.
template <class EA, class EB>
void product_4m(const EA& ar, const EA& ai, double sa, const EB& br,
                const EB& bi, double sb, const CMatMut& c, bool accumulate) {
  MutMap cr(c.re, c.rows, c.cols);
  MutMap ci(c.im, c.rows, c.cols);
  if (!accumulate) {
    cr.setZero();
    ci.setZero();
  }
  cr.noalias() += ar * br;
  cr.noalias() -= (sa * sb) * (ai * bi);
  ci.noalias() += sb * (ar * bi);
  ci.noalias() += sa * (ai * br);
}

template <class EA, class EB>
void product(const EA& ar, const EA& ai, double sa, const EB& br, const EB& bi,
             double sb, const CMatMut& c, bool accumulate, bool four) {
  if (four)
    product_4m(ar, ai, sa, br, bi, sb, c, accumulate);
  else
    product_3m(ar, ai, sa, br, bi, sb, c, accumulate);
}

}  // namespace

void cgemm(const CMatView& a, Form fa, const CMatView& b, Form fb,
           const CMatMut& c, bool accumulate) {
  const std::size_t m = fa == Form::kPlain ? a.rows : a.cols;
  const std::size_t k = fa == Form::kPlain ? a.cols : a.rows;
  const std::size_t kb = fb == Form::kPlain ? b.rows : b.cols;
  const std::size_t n = fb == Form::kPlain ? b.cols : b.rows;
  if (k != kb || c.rows != m || c.cols != n)
    throw ShapeError("cgemm dimension mismatch");
  ConstMap ar(a.re, a.rows, a.cols), ai(a.im, a.rows, a.cols);
  ConstMap br(b.re, b.rows, b.cols), bi(b.im, b.rows, b.cols);
  const double sa = fa == Form::kPlain ? 1.0 : -1.0;
  const double sb = fb == Form::kPlain ? 1.0 : -1.0;
  const bool four = fa != Form::kPlain || fb != Form::kPlain || k < 64;
  if (fa == Form::kPlain && fb == Form::kPlain) {
    product(ar, ai, sa, br, bi, sb, c, accumulate, four);
  } else if (fa == Form::kPlain) {
    product(ar, ai, sa, br.transpose(), bi.transpose(), sb, c, accumulate, four);
  } else if (fb == Form::kPlain) {
    product(ar.transpose(), ai.transpose(), sa, br, bi, sb, c, accumulate, four);
  } else {
    product(ar.transpose(), ai.transpose(), sa, br.transpose(), bi.transpose(), sb,
            c, accumulate, four);
  }
}

}  // namespace ccqt::kernels
