#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <random>

#include "ccqt/ctensor/adam.hpp"
#include "ccqt/ctensor/autograd.hpp"
#include "ccqt/ctensor/ops.hpp"
#include "ccqt/errors.hpp"
#include "support/gradcheck.hpp"

using namespace ccqt;
using ccqt::testing::finite_difference;
using ccqt::testing::random_tensor;
using ccqt::testing::relative_error;

namespace {

ComplexTensor leaf(std::complex<double> v) {
  auto t = ComplexTensor::scalar(v);
  t.set_requires_grad(true);
  return t;
}

}  // namespace

TEST_CASE("elementwise arithmetic by hand") {
  const auto a = ComplexTensor::scalar({1, 2});
  const auto b = ComplexTensor::scalar({3, -1});
  CHECK(add(a, b).at(0) == std::complex<double>(4, 1));
  CHECK(mul(a, ComplexTensor::scalar({3, 4})).at(0) ==
        std::complex<double>(-5, 10));
  CHECK(elementwise(ElementwiseOp::kSub, a, b).at(0) ==
        std::complex<double>(-2, 3));

  std::mt19937_64 rng(7);
  const auto z = random_tensor({4, 5}, rng);
  const auto one = ComplexTensor::scalar({1, 0});
  const auto same = mul(z, one);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(same.at(i) == z.at(i));
}

TEST_CASE("elementwise shape errors") {
  const auto a = ComplexTensor::zeros({2, 3});
  const auto b = ComplexTensor::zeros({3, 2});
  CHECK_THROWS_AS(add(a, b), ShapeError);
  CHECK_THROWS_AS(elementwise(ElementwiseOp::kMul, a), ShapeError);
  CHECK_THROWS_AS(scale_by_real(a, ComplexTensor::scalar({1, 1})), ShapeError);
  CHECK_NOTHROW(add(a, ComplexTensor::scalar({1, 0})));
}

TEST_CASE("non-finite results are reported") {
  const auto big = ComplexTensor::scalar({1e300, 0});
  CHECK_THROWS_AS(mul(big, big), NonFiniteError);
}

TEST_CASE("conj and magnitude identities") {
  std::mt19937_64 rng(3);
  const auto z = random_tensor({50}, rng);
  const auto cc = conj(conj(z));
  const auto m = magnitude(z);
  const auto mc = magnitude(conj(z));
  for (std::size_t i = 0; i < z.size(); ++i) {
    CHECK(cc.at(i) == z.at(i));
    CHECK(m.real()[i] == mc.real()[i]);
    CHECK(m.real()[i] >= 0.0);
    CHECK(m.imag()[i] == 0.0);
  }
}

TEST_CASE("complex_matmul") {
  SUBCASE("identity") {
    const auto eye = ComplexTensor::from_real({2, 2}, {1, 0, 0, 1});
    const auto v = ComplexTensor::from_planes({2, 1}, {0.3, -2}, {1.5, 0.25});
    const auto r = complex_matmul(eye, v);
    CHECK(r.at(0) == v.at(0));
    CHECK(r.at(1) == v.at(1));
  }
  SUBCASE("scalar product") {
    const auto a = ComplexTensor::from_planes({1, 1}, {1}, {1});
    const auto b = ComplexTensor::from_planes({1, 1}, {1}, {-1});
    const auto r = complex_matmul(a, b);
    CHECK(r.at(0).real() == doctest::Approx(2.0));
    CHECK(std::abs(r.at(0).imag()) < 1e-15);
  }
  SUBCASE("naive triple loop oracle") {
    std::mt19937_64 rng(11);
    const auto a = random_tensor({3, 4}, rng);
    const auto b = random_tensor({4, 2}, rng);
    const auto r = complex_matmul(a, b);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        std::complex<double> acc = 0;
        for (std::size_t k = 0; k < 4; ++k) acc += a.at(i * 4 + k) * b.at(k * 2 + j);
        CHECK(std::abs(r.at(i * 2 + j) - acc) < 1e-12);
      }
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(complex_matmul(ComplexTensor::zeros({2, 3}),
                                   ComplexTensor::zeros({2, 3})),
                    ShapeError);
  }
}

TEST_CASE("backward fixed examples") {
  SUBCASE("|w|^2 at 1+2i") {
    auto w = leaf({1, 2});
    auto loss_fn = [&] { return real_part(mul(w, conj(w))); };
    backward(loss_fn());
    CHECK(w.grad_real()[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(w.grad_imag()[0] == doctest::Approx(4.0).epsilon(1e-12));
    const auto fd = finite_difference(loss_fn, w);
    CHECK(fd.re[0] == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(fd.im[0] == doctest::Approx(4.0).epsilon(1e-8));
  }
  SUBCASE("Re(w)") {
    auto w = leaf({-0.7, 3.1});
    backward(real_part(w));
    CHECK(w.grad_real()[0] == 1.0);
    CHECK(w.grad_imag()[0] == 0.0);
  }
  SUBCASE("constant in w") {
    auto w = leaf({0.5, 0.5});
    auto other = leaf({2, 0});
    auto unused = mul(w, ComplexTensor::scalar({0, 0}));
    backward(add(real_part(other), real_part(unused)));
    REQUIRE(w.has_grad());
    CHECK(w.grad_real()[0] == 0.0);
    CHECK(w.grad_imag()[0] == 0.0);
  }
}

TEST_CASE("backward errors") {
  auto w = leaf({1, 1});
  CHECK_THROWS_AS(backward(mul(w, w)), GraphError);  // complex-valued loss
  auto v = ComplexTensor::zeros({2}).set_requires_grad(true);
  CHECK_THROWS_AS(backward(real_part(v)), GraphError);  // not a scalar
}

TEST_CASE("graph visits each node once") {
  auto w = leaf({0.3, -0.2});
  auto y = mul(w, w);
  auto z = add(y, y);  // y reached twice
  const auto loss = real_part(z);
  const auto g = build_graph(loss);
  CHECK(g.order.size() == 3);
  CHECK(g.leaves.size() == 1);
  backward(loss, g);
  // d/dw Re(2 w^2) -> conj(4w)
  CHECK(w.grad_real()[0] == doctest::Approx(4 * 0.3));
  CHECK(w.grad_imag()[0] == doctest::Approx(4 * 0.2));
}

TEST_CASE("finite-difference agreement for every differentiable op") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    auto a = random_tensor({3, 4}, rng).set_requires_grad(true);
    auto b = random_tensor({3, 4}, rng).set_requires_grad(true);
    auto r = ComplexTensor::from_real({3, 4}, std::vector<double>(12, 0.0));
    {
      std::uniform_real_distribution<double> u(-1, 1);
      for (auto& v : r.real_mut()) v = u(rng);
    }
    r.set_requires_grad(true);
    auto m = random_tensor({4, 2}, rng).set_requires_grad(true);
    auto probe = random_tensor({3, 4}, rng);
    auto probe2 = random_tensor({3, 2}, rng);

    // Each loss is Re(sum(probe · op(...))) so every output component matters.
    const std::vector<std::pair<const char*, std::function<ComplexTensor()>>> cases = {
        {"add", [&] { return real_part(sum(mul(probe, add(a, b)))); }},
        {"sub", [&] { return real_part(sum(mul(probe, sub(a, b)))); }},
        {"mul", [&] { return real_part(sum(mul(probe, mul(a, b)))); }},
        {"conj", [&] { return real_part(sum(mul(probe, conj(a)))); }},
        {"magnitude", [&] { return real_part(sum(mul(probe, magnitude(a)))); }},
        {"scale_by_real", [&] { return real_part(sum(mul(probe, scale_by_real(a, r)))); }},
        {"scale", [&] { return real_part(sum(mul(probe, scale(a, -1.7)))); }},
        {"imag_part", [&] { return real_part(sum(mul(probe, imag_part(b)))); }},
        {"mean", [&] { return real_part(mul(mean(a), mean(b))); }},
        {"matmul", [&] { return real_part(sum(mul(probe2, complex_matmul(a, m)))); }},
    };
    for (const auto& [name, fn] : cases) {
      CAPTURE(name);
      CAPTURE(seed);
      for (auto* t : {&a, &b, &r, &m}) t->clear_grad();
      backward(fn());
      for (auto* t : {&a, &b, &r, &m}) {
        if (!t->has_grad()) continue;
        const auto fd = finite_difference(fn, *t, 1e-6, {}, t == &r);
        CHECK(relative_error(*t, fd) < 1e-5);
      }
    }
  }
}

TEST_CASE("backward is linear in the loss") {
  std::mt19937_64 rng(5);
  auto w = random_tensor({6}, rng).set_requires_grad(true);
  auto p = random_tensor({6}, rng);
  auto l1 = [&] { return real_part(sum(mul(p, mul(w, w)))); };
  auto l2 = [&] { return real_part(sum(magnitude(w))); };
  backward(l1());
  std::vector<double> g1r(w.grad_real().begin(), w.grad_real().end());
  std::vector<double> g1i(w.grad_imag().begin(), w.grad_imag().end());
  w.clear_grad();
  backward(l2());
  std::vector<double> g2r(w.grad_real().begin(), w.grad_real().end());
  std::vector<double> g2i(w.grad_imag().begin(), w.grad_imag().end());
  w.clear_grad();
  const double ca = 0.75, cb = -2.5;
  backward(add(scale(l1(), ca), scale(l2(), cb)));
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(w.grad_real()[i] == doctest::Approx(ca * g1r[i] + cb * g2r[i]).epsilon(1e-12));
    CHECK(w.grad_imag()[i] == doctest::Approx(ca * g1i[i] + cb * g2i[i]).epsilon(1e-12));
  }
}

TEST_CASE("repeated evaluation is bit-identical") {
  std::mt19937_64 rng(9);
  auto a = random_tensor({5, 7}, rng).set_requires_grad(true);
  auto b = random_tensor({7, 3}, rng).set_requires_grad(true);
  auto run = [&] {
    a.clear_grad();
    b.clear_grad();
    auto y = complex_matmul(a, b);
    auto loss = real_part(sum(magnitude(y)));
    backward(loss);
    return std::tuple{loss.real()[0],
                      std::vector<double>(a.grad_real().begin(), a.grad_real().end()),
                      std::vector<double>(b.grad_imag().begin(), b.grad_imag().end())};
  };
  CHECK(run() == run());
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradient, zero decay leaves parameters") {
    AdamState st;
    st.hyper.weight_decay = 0.0;
    std::vector<ComplexTensor> params{ComplexTensor::scalar({0.4, -0.1})};
    params[0].set_requires_grad(true).zero_grad();
    adam_step(params, st);
    CHECK(params[0].at(0) == std::complex<double>(0.4, -0.1));
    CHECK(st.step == 1);
    CHECK_FALSE(params[0].has_grad());
  }
  SUBCASE("first step is lr·g/(|g|+eps) per component") {
    AdamState st;
    st.hyper.weight_decay = 0.0;
    std::vector<ComplexTensor> params{ComplexTensor::scalar({1.0, 2.0})};
    params[0].set_requires_grad(true);
    auto g = grad_buffers(params[0]);
    g.re[0] = 0.3;
    g.im[0] = -4.0;
    adam_step(params, st);
    const double lr = st.hyper.learning_rate, eps = st.hyper.epsilon;
    CHECK(params[0].at(0).real() == doctest::Approx(1.0 - lr * 0.3 / (0.3 + eps)).epsilon(1e-14));
    CHECK(params[0].at(0).imag() == doctest::Approx(2.0 + lr * 4.0 / (4.0 + eps)).epsilon(1e-14));
  }
  SUBCASE("two-step trace with weight decay") {
    AdamState st;
    st.hyper.weight_decay = 0.01;
    std::vector<ComplexTensor> params{ComplexTensor::scalar({0.5, 0.0})};
    params[0].set_requires_grad(true);
    grad_buffers(params[0]).re[0] = 0.2;
    adam_step(params, st);
    CHECK(std::abs(params[0].at(0).real() - 0.49500000024390245) < 1e-12);
    grad_buffers(params[0]).re[0] = -0.1;
    adam_step(params, st);
    CHECK(std::abs(params[0].at(0).real() - 0.4935265223408191) < 1e-12);
    CHECK(params[0].at(0).imag() == 0.0);
    for (double v : st.moments[0].v_re) CHECK(v >= 0.0);
  }
  SUBCASE("missing gradient") {
    AdamState st;
    std::vector<ComplexTensor> params{ComplexTensor::scalar({1, 1})};
    CHECK_THROWS_AS(adam_step(params, st), StateError);
  }
}
