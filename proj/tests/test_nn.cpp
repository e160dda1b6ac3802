#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "ccqt/ctensor/autograd.hpp"
#include "ccqt/ctensor/ops.hpp"
#include "ccqt/errors.hpp"
#include "ccqt/nn/checkpoint.hpp"
#include "ccqt/nn/layers.hpp"
#include "ccqt/nn/model.hpp"
#include "support/grad_suite.hpp"
#include "support/gradcheck.hpp"

using namespace ccqt;
using namespace ccqt::nn;
using cd = std::complex<double>;

namespace {

// Real cross-correlation with zero padding, written out as plain loops.
std::vector<double> real_conv(const std::vector<double>& x, const std::vector<double>& w,
                              std::size_t B, std::size_t cin, std::size_t H, std::size_t W,
                              std::size_t cout, std::size_t k, std::size_t stride,
                              std::size_t pad, std::size_t& oh, std::size_t& ow) {
  oh = (H + 2 * pad - k) / stride + 1;
  ow = (W + 2 * pad - k) / stride + 1;
  std::vector<double> y(B * cout * oh * ow, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double acc = 0.0;
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t u = 0; u < k; ++u)
              for (std::size_t v = 0; v < k; ++v) {
                const long yy = static_cast<long>(i * stride + u) - static_cast<long>(pad);
                const long xx = static_cast<long>(j * stride + v) - static_cast<long>(pad);
                if (yy < 0 || xx < 0 || yy >= static_cast<long>(H) || xx >= static_cast<long>(W))
                  continue;
                acc += w[((co * cin + ci) * k + u) * k + v] *
                       x[((b * cin + ci) * H + static_cast<std::size_t>(yy)) * W +
                         static_cast<std::size_t>(xx)];
              }
          y[((b * cout + co) * oh + i) * ow + j] = acc;
        }
  return y;
}

ComplexTensor delta_kernel(cd center) {
  auto w = ComplexTensor::zeros({1, 1, 3, 3});
  w.real_mut()[4] = center.real();
  w.imag_mut()[4] = center.imag();
  return w;
}

}  // namespace

TEST_CASE("crelu") {
  const std::vector<cd> in{{1, 2}, {-1, 2}, {-1, -2}, {0, 0}};
  const auto out = crelu(ComplexTensor::from_complex({4}, in));
  CHECK(out.at(0) == cd(1, 2));
  CHECK(out.at(1) == cd(0, 2));
  CHECK(out.at(2) == cd(0, 0));
  CHECK(out.at(3) == cd(0, 0));
  std::mt19937_64 rng(3);
  const auto x = testing::random_tensor({50}, rng);
  const auto once = crelu(x), twice = crelu(once);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(once.at(i) == twice.at(i));
}

TEST_CASE("complex_conv2d") {
  std::mt19937_64 rng(11);
  SUBCASE("center tap i rotates by 90 degrees") {
    const auto x = testing::random_tensor({2, 1, 5, 4}, rng);
    const auto y = complex_conv2d(x, delta_kernel({0, 1}), ComplexTensor::zeros({1}), 1, 1);
    REQUIRE(y.shape() == x.shape());
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK(std::abs(y.at(i) - cd(0, 1) * x.at(i)) < 1e-15);
  }
  SUBCASE("center tap 1 is the identity") {
    const auto x = testing::random_tensor({1, 1, 4, 6}, rng);
    const auto y = complex_conv2d(x, delta_kernel({1, 0}), ComplexTensor::zeros({1}), 1, 1);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(y.at(i) - x.at(i)) < 1e-15);
  }
  SUBCASE("four real convolutions") {
    for (std::size_t H : {5, 8, 9}) {
      const std::size_t B = 2, cin = 3, W = 7, cout = 4;
      const auto x = testing::random_tensor({B, cin, H, W}, rng);
      const auto w = testing::random_tensor({cout, cin, 3, 3}, rng);
      const auto y = complex_conv2d(x, w, ComplexTensor::zeros({cout}));
      const std::vector<double> xr(x.real().begin(), x.real().end()),
          xi(x.imag().begin(), x.imag().end()), wr(w.real().begin(), w.real().end()),
          wi(w.imag().begin(), w.imag().end());
      std::size_t oh = 0, ow = 0;
      const auto rr = real_conv(xr, wr, B, cin, H, W, cout, 3, 2, 1, oh, ow);
      const auto ii = real_conv(xi, wi, B, cin, H, W, cout, 3, 2, 1, oh, ow);
      const auto ri = real_conv(xr, wi, B, cin, H, W, cout, 3, 2, 1, oh, ow);
      const auto ir = real_conv(xi, wr, B, cin, H, W, cout, 3, 2, 1, oh, ow);
      REQUIRE(y.shape() == Shape{B, cout, (H + 1) / 2, (W + 1) / 2});
      REQUIRE(oh == (H + 1) / 2);
      double worst = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i)
        worst = std::max(worst, std::abs(y.at(i) - cd(rr[i] - ii[i], ri[i] + ir[i])));
      CHECK(worst < 1e-10);
    }
  }
  SUBCASE("bias is added per channel") {
    const auto x = ComplexTensor::zeros({1, 1, 4, 4});
    const auto bias = ComplexTensor::from_complex({2}, std::vector<cd>{{1, 2}, {-3, 0.5}});
    const auto y = complex_conv2d(x, ComplexTensor::zeros({2, 1, 3, 3}), bias);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(y.at(i) == cd(1, 2));
      CHECK(y.at(4 + i) == cd(-3, 0.5));
    }
  }
  SUBCASE("channel mismatch") {
    CHECK_THROWS_AS(complex_conv2d(ComplexTensor::zeros({1, 2, 4, 4}),
                                   ComplexTensor::zeros({1, 3, 3, 3}), ComplexTensor::zeros({1})),
                    ShapeError);
  }
}

TEST_CASE("complex_batchnorm") {
  std::mt19937_64 rng(5);
  auto x = testing::random_tensor({4, 3, 5, 6}, rng, -2.0, 3.0);
  SUBCASE("training mode statistics") {
    // Unit mean-square holds up to the factor v / (v + eps); a tiny eps
    // isolates the normalization itself.
    auto state = BatchNormState::make(3, 0.1, 1e-12);
    const auto y = complex_batchnorm(x, state, Mode::kTrain);
    const std::size_t S = 30;
    for (std::size_t c = 0; c < 3; ++c) {
      // Two-pass oracle on the output.
      cd m = 0;
      std::size_t n = 0;
      for (std::size_t b = 0; b < 4; ++b)
        for (std::size_t s = 0; s < S; ++s, ++n) m += y.at((b * 3 + c) * S + s);
      m /= static_cast<double>(n);
      double sq = 0;
      for (std::size_t b = 0; b < 4; ++b)
        for (std::size_t s = 0; s < S; ++s) sq += std::norm(y.at((b * 3 + c) * S + s) - m);
      sq /= static_cast<double>(n);
      CHECK(std::abs(m) < 1e-9);
      CHECK(std::abs(sq - 1.0) < 1e-6);
    }
    CHECK(state.has_stats);
  }
  SUBCASE("eval mode with batch statistics reproduces training mode") {
    auto state = BatchNormState::make(3);
    testing::copy_random(state.gamma, rng);
    testing::copy_random(state.beta, rng);
    const auto train_out = complex_batchnorm(x, state, Mode::kTrain, false);
    const std::size_t S = 30;
    for (std::size_t c = 0; c < 3; ++c) {
      cd m = 0;
      for (std::size_t b = 0; b < 4; ++b)
        for (std::size_t s = 0; s < S; ++s) m += x.at((b * 3 + c) * S + s);
      m /= 120.0;
      double v = 0;
      for (std::size_t b = 0; b < 4; ++b)
        for (std::size_t s = 0; s < S; ++s) v += std::norm(x.at((b * 3 + c) * S + s) - m);
      state.running_mean[c] = m;
      state.running_var[c] = v / 120.0;
    }
    state.has_stats = true;
    const auto eval_out = complex_batchnorm(x, state, Mode::kEval);
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK(std::abs(eval_out.at(i) - train_out.at(i)) < 1e-9);
  }
  SUBCASE("running statistics follow the momentum rule") {
    auto state = BatchNormState::make(3, 0.1);
    complex_batchnorm(x, state, Mode::kTrain);
    auto fresh = BatchNormState::make(3);
    complex_batchnorm(x, fresh, Mode::kTrain, false);
    CHECK_FALSE(fresh.has_stats);
    // After one update: 0.9·init + 0.1·batch.
    cd m = 0;
    for (std::size_t b = 0; b < 4; ++b)
      for (std::size_t s = 0; s < 30; ++s) m += x.at(b * 90 + s);
    m /= 120.0;
    CHECK(std::abs(state.running_mean[0] - 0.1 * m) < 1e-12);
  }
  SUBCASE("eval before statistics") {
    auto state = BatchNormState::make(3);
    CHECK_THROWS_AS(complex_batchnorm(x, state, Mode::kEval), StateError);
  }
  SUBCASE("single value per channel in training mode") {
    auto state = BatchNormState::make(3);
    CHECK_THROWS_AS(complex_batchnorm(ComplexTensor::zeros({1, 3, 1, 1}), state, Mode::kTrain),
                    ShapeError);
  }
}

TEST_CASE("complex_dropout") {
  auto rng = make_rng(17);
  std::mt19937_64 g(2);
  const auto x = testing::random_tensor({10, 10}, g);
  CHECK(complex_dropout(x, 0.0, Mode::kTrain, rng).same(x));
  CHECK(complex_dropout(x, 0.9, Mode::kEval, rng).same(x));
  CHECK_THROWS_AS(complex_dropout(x, 1.0, Mode::kTrain, rng), ConfigError);

  const std::size_t n = 1000000;
  const auto ones = ComplexTensor::from_planes({n}, std::vector<double>(n, 1.0),
                                               std::vector<double>(n, 1.0));
  const auto y = complex_dropout(ones, 0.4, Mode::kTrain, rng);
  std::size_t survivors = 0;
  bool exact_scale = true, whole_units = true;
  for (std::size_t i = 0; i < n; ++i) {
    const double re = y.real()[i], im = y.imag()[i];
    if ((re == 0.0) != (im == 0.0)) whole_units = false;
    if (re != 0.0) {
      ++survivors;
      if (re != 1.0 / 0.6 || im != 1.0 / 0.6) exact_scale = false;
    }
  }
  const double fraction = static_cast<double>(survivors) / static_cast<double>(n);
  CHECK(std::abs(fraction - 0.6) < 0.003);
  CHECK(exact_scale);
  CHECK(whole_units);
}

TEST_CASE("magnitude_softmax") {
  const auto a = magnitude_softmax(ComplexTensor::zeros({1, 2}));
  CHECK(a.real()[0] == 0.5);
  CHECK(a.real()[1] == 0.5);
  const auto b = magnitude_softmax(ComplexTensor::from_complex({1, 2}, std::vector<cd>{{3, 4}, {0, 0}}));
  const double e5 = std::exp(5.0);
  CHECK(b.real()[0] == doctest::Approx(e5 / (e5 + 1)).epsilon(1e-14));
  CHECK(b.real()[1] == doctest::Approx(1 / (e5 + 1)).epsilon(1e-14));
  CHECK(b.real()[0] == doctest::Approx(0.993307).epsilon(1e-6));
  std::mt19937_64 rng(4);
  const auto z = testing::random_tensor({6, 2}, rng, -3, 3);
  const auto rotated = mul(z, ComplexTensor::scalar(std::polar(1.0, 0.83)));
  const auto p = magnitude_softmax(z), q = magnitude_softmax(rotated);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(std::abs(p.real()[i] - q.real()[i]) < 1e-14);
}

TEST_CASE("cross_entropy value") {
  const auto z = ComplexTensor::from_complex({2, 2}, std::vector<cd>{{3, 4}, {0, 0}, {0, 1}, {0, 0}});
  const double e5 = std::exp(5.0), e1 = std::exp(1.0);
  const double expected = 0.5 * (-std::log(1 / (e5 + 1)) - std::log(e1 / (e1 + 1)));
  CHECK(cross_entropy(z, {1, 0}).real()[0] == doctest::Approx(expected).epsilon(1e-14));
  CHECK_THROWS_AS(cross_entropy(z, {2, 0}), ShapeError);
}

TEST_CASE("per-op gradients agree with finite differences") {
  for (const auto& r : testing::per_op_gradchecks(20)) {
    CAPTURE(r.name);
    CHECK(r.worst < 1e-5);
  }
}

TEST_CASE("tiny model end-to-end gradients") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    CAPTURE(seed);
    const auto single = testing::end_to_end_gradcheck(seed, 1);
    CHECK(single.worst_tensor < 1e-4);
    CHECK(single.global < 1e-4);
    CHECK(testing::end_to_end_gradcheck(seed, 2).global < 1e-4);
  }
}

TEST_CASE("model forward") {
  Model model(ModelConfig{}, dsp::CqtConfig::defaults(), 3);
  std::mt19937_64 rng(1);
  const auto x = testing::random_tensor({2, 1, 96, 256}, rng);
  auto drop = make_rng(1);
  SUBCASE("shapes and score rows") {
    const auto out = model.forward(x, Mode::kTrain, &drop);
    CHECK(out.logits.shape() == Shape{2, 2});
    for (std::size_t b = 0; b < 2; ++b) {
      const double p0 = out.scores.real()[2 * b], p1 = out.scores.real()[2 * b + 1];
      CHECK(std::abs(p0 + p1 - 1.0) < 1e-12);
      CHECK(p0 > 0.0);
      CHECK(p1 > 0.0);
    }
    // Linear input width = channels · ceil^4(96) = 128 · 6.
    CHECK(model.parameters()[18].tensor.shape() == Shape{256, 128 * 6});
  }
  SUBCASE("eval mode is deterministic") {
    CHECK_THROWS_AS(model.forward(x, Mode::kEval), StateError);
    model.forward(x, Mode::kTrain, &drop);
    const auto a = model.forward(x, Mode::kEval), b = model.forward(x, Mode::kEval);
    for (std::size_t i = 0; i < 4; ++i) CHECK(a.scores.real()[i] == b.scores.real()[i]);
  }
  SUBCASE("zero-phase input has finite input gradients") {
    model.forward(x, Mode::kTrain, &drop);
    auto mag = magnitude(x).detach();
    mag.set_requires_grad(true);
    const auto out = model.forward(mag, Mode::kEval);
    backward(cross_entropy(out.logits, {0, 1}));
    for (double v : mag.grad_imag()) REQUIRE(std::isfinite(v));
    for (double v : mag.grad_real()) REQUIRE(std::isfinite(v));
  }
  SUBCASE("global phase rotation changes scores") {
    model.forward(x, Mode::kTrain, &drop);
    const auto a = model.forward(x, Mode::kEval);
    double biggest = 0.0;
    for (double phi : {0.3, 1.1, 2.0}) {
      const auto b = model.forward(mul(x, ComplexTensor::scalar(std::polar(1.0, phi))), Mode::kEval);
      biggest = std::max(biggest, std::abs(a.scores.real()[0] - b.scores.real()[0]));
    }
    CHECK(biggest > 1e-6);
  }
  SUBCASE("input too small or mismatched") {
    CHECK_THROWS_AS(model.forward(ComplexTensor::zeros({1, 1, 96, 8}), Mode::kTrain, &drop),
                    ShapeError);
    CHECK_THROWS_AS(model.forward(ComplexTensor::zeros({1, 1, 64, 64}), Mode::kTrain, &drop),
                    ShapeError);
  }
  SUBCASE("parameter count") {
    // 160 + 4640 + 18496 + 73856 conv, 480 bn, 196864 + 32896 + 258 linear, 2 log.
    CHECK(model.parameter_count() == 327652);
  }
}

TEST_CASE("model config validation") {
  ModelConfig c;
  c.conv_channels = {16, 32, 64};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.linear_widths = {256, 128, 3};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.dropout_p = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  KeyValues kv;
  ModelConfig{}.to_kv(kv);
  const auto back = ModelConfig::from_kv(kv);
  CHECK(back.conv_channels == ModelConfig{}.conv_channels);
  CHECK(back.dropout_p == 0.4);
}

TEST_CASE("checkpoint") {
  const auto dir = std::filesystem::temp_directory_path() / "ccqt_test_nn";
  std::filesystem::create_directories(dir);
  Model model(testing::tiny_model_config(), testing::tiny_feature_config(), 9);
  {
    std::mt19937_64 rng(1);
    auto drop = make_rng(2);
    model.forward(testing::random_tensor({3, 1, 16, 20}, rng), Mode::kTrain, &drop);
  }
  SUBCASE("save, load, save is byte-identical") {
    const auto first = serialize_checkpoint(model);
    REQUIRE(std::string(first.begin(), first.begin() + 8) == "CCQT0001");
    const auto loaded = deserialize_checkpoint(first);
    CHECK(serialize_checkpoint(loaded) == first);
    CHECK(loaded.has_bn_stats());
    const auto p = model.parameters(), q = loaded.parameters();
    for (std::size_t i = 0; i < p.size(); ++i)
      for (std::size_t j = 0; j < p[i].tensor.size(); ++j)
        CHECK(q[i].tensor.real()[j] == static_cast<double>(static_cast<float>(p[i].tensor.real()[j])));
    save_checkpoint(loaded, (dir / "m.ckpt").string());
    CHECK(serialize_checkpoint(load_checkpoint((dir / "m.ckpt").string())) == first);
  }
  SUBCASE("corrupted magic") {
    auto bytes = serialize_checkpoint(model);
    bytes[0] = 'X';
    CHECK_THROWS_AS(deserialize_checkpoint(bytes), MalformedFileError);
  }
  SUBCASE("version mismatch") {
    auto bytes = serialize_checkpoint(model);
    bytes[7] = '2';
    CHECK_THROWS_AS(deserialize_checkpoint(bytes), UnsupportedFormatError);
  }
  SUBCASE("manifest shape does not match payload") {
    // Hand-built container: one tensor declared 3x3 over 4 stored values.
    KeyValues kv;
    kv.set("checkpoint.version", "1");
    testing::tiny_model_config().to_kv(kv);
    testing::tiny_feature_config().to_kv(kv);
    kv.set("state.bn_stats", "false");
    kv.set("tensor.log_compress.alpha", "3x3 @ 0");
    kv.set("payload.bytes", "32");
    const auto text = kv.to_text();
    std::vector<std::uint8_t> bytes{'C', 'C', 'Q', 'T', '0', '0', '0', '1'};
    const auto len = static_cast<std::uint32_t>(text.size());
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
    bytes.insert(bytes.end(), text.begin(), text.end());
    bytes.insert(bytes.end(), 32, 0);
    CHECK_THROWS_AS(deserialize_checkpoint(bytes), MalformedFileError);
  }
  SUBCASE("truncated payload") {
    auto bytes = serialize_checkpoint(model);
    bytes.resize(bytes.size() - 4);
    CHECK_THROWS_AS(deserialize_checkpoint(bytes), MalformedFileError);
  }
}
