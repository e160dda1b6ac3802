#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "ccqt/dsp/features.hpp"
#include "ccqt/errors.hpp"
#include "ccqt/explain/saliency.hpp"
#include "support/formats.hpp"
#include "support/saliency_check.hpp"
#include "support/small_setup.hpp"

using namespace ccqt;
using namespace ccqt::explain;

namespace fs = std::filesystem;

namespace {

struct Fixture {
  dsp::ClipPipeline pipeline{testing::small_features(), {}, 1.0};
  std::vector<train::LabeledClip> clips = train::synth_dataset(testing::small_synth(3));
  nn::Model model{testing::small_model(), testing::small_features(), 21};
  dsp::ComplexSpectrogram spec;

  Fixture() {
    testing::warm_up(model, clips, pipeline);
    spec = pipeline.transform(pipeline.eval_window(clips[1].clip));
  }
};

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("ccqt_explain_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

double median(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST_CASE("saliency shape and sign") {
  Fixture fx;
  for (int target : {0, 1}) {
    const auto map = saliency(fx.model, fx.spec, target);
    CHECK(map.bins == fx.spec.bins());
    CHECK(map.frames == fx.spec.frames());
    CHECK(map.values.size() == fx.spec.data.size());
    CHECK(map.target_class == target);
    CHECK(std::all_of(map.values.begin(), map.values.end(), [](double v) { return v >= 0.0; }));
    CHECK(*std::max_element(map.values.begin(), map.values.end()) > 0.0);
  }
  for (const auto& p : fx.model.parameters()) {
    CHECK(p.tensor.requires_grad());
    CHECK_FALSE(p.tensor.has_grad());
  }
}

TEST_CASE("saliency matches finite differences") {
  Fixture fx;
  for (int target : {0, 1}) {
    const auto r = testing::saliency_fd_check(fx.model, fx.spec, target, 10, 100 + target);
    CHECK(r.bins == 10);
    CHECK(r.worst < 1e-3);
  }
}

TEST_CASE("saliency of a model with zero final weights vanishes") {
  Fixture fx;
  for (auto& p : fx.model.parameters())
    if (p.name == "linear3.weight") {
      std::fill(p.tensor.real_mut().begin(), p.tensor.real_mut().end(), 0.0);
      std::fill(p.tensor.imag_mut().begin(), p.tensor.imag_mut().end(), 0.0);
    }
  const auto map = saliency(fx.model, fx.spec, 1);
  CHECK(std::all_of(map.values.begin(), map.values.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("smoothgrad") {
  Fixture fx;
  const auto plain = saliency(fx.model, fx.spec, 1);
  const auto degenerate = smoothgrad(fx.model, fx.spec, 1, 1, 0.0, 77);
  CHECK(degenerate.values == plain.values);
  CHECK(smoothgrad(fx.model, fx.spec, 1, 3, 0.0, 5).values.size() == plain.values.size());

  const auto mean4 = smoothgrad(fx.model, fx.spec, 1, 4, 0.1, 9);
  CHECK(mean4.n_samples == 4);
  CHECK(mean4.sigma == 0.1);
  std::vector<double> acc(plain.values.size(), 0.0);
  for (std::size_t s = 0; s < 4; ++s) {
    const auto m = noisy_saliency(fx.model, fx.spec, 1, 0.1, 9, s);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += m.values[i];
  }
  for (std::size_t i = 0; i < acc.size(); ++i) CHECK(mean4.values[i] == acc[i] / 4.0);
  CHECK(mean4.values != plain.values);
  CHECK(smoothgrad(fx.model, fx.spec, 1, 4, 0.1, 9).values == mean4.values);

  CHECK_THROWS_AS(smoothgrad(fx.model, fx.spec, 1, 0, 0.1, 1), ConfigError);
  CHECK_THROWS_AS(smoothgrad(fx.model, fx.spec, 1, 2, -0.1, 1), ConfigError);
}

TEST_CASE("smoothgrad variance shrinks with more samples") {
  Fixture fx;
  auto spread = [&](std::size_t n) {
    const std::size_t runs = 20, size = fx.spec.data.size();
    std::vector<double> sum(size, 0.0), sum_sq(size, 0.0);
    for (std::size_t r = 0; r < runs; ++r) {
      const auto m = smoothgrad(fx.model, fx.spec, 1, n, 0.1, 1000 + r);
      for (std::size_t i = 0; i < size; ++i) {
        sum[i] += m.values[i];
        sum_sq[i] += m.values[i] * m.values[i];
      }
    }
    std::vector<double> sd(size);
    for (std::size_t i = 0; i < size; ++i) {
      const double mean = sum[i] / runs;
      sd[i] = std::sqrt(std::max(0.0, sum_sq[i] / runs - mean * mean));
    }
    return median(sd);
  };
  CHECK(spread(32) < spread(1));
}

TEST_CASE("saliency input checks") {
  Fixture fx;
  CHECK_THROWS_AS(saliency(fx.model, fx.spec, 2), ConfigError);
  Rng rng(1);
  const auto zero = dsp::phase_ablate(fx.spec, dsp::PhaseMode::kZero, rng);
  CHECK_THROWS_AS(saliency(fx.model, zero, 1), StateError);
  nn::Model fresh(testing::small_model(), testing::small_features(), 1);
  CHECK_THROWS_AS(saliency(fresh, fx.spec, 1), StateError);
  dsp::ComplexSpectrogram wrong{ComplexTensor::zeros({20, 16}), fx.spec.config, dsp::PhaseMode::kFull};
  CHECK_THROWS_AS(saliency(fx.model, wrong, 1), ShapeError);
}

TEST_CASE("map export") {
  const auto dir = scratch("export");
  SaliencyMap map;
  map.bins = 3;
  map.frames = 4;
  map.values = {0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 1.0 / 3.0};
  export_pgm(map, (dir / "m.pgm").string());
  testing::PgmImage img;
  REQUIRE(testing::check_pgm((dir / "m.pgm").string(), &img) == "");
  CHECK(img.width == 4);
  CHECK(img.height == 3);
  CHECK(img.maxval == 255);
  // First row is the highest bin (k = 2); k = 0 sits at the bottom.
  CHECK(img.pixels[0] == std::lround(255.0 * 8.0 / 10.0));
  CHECK(img.pixels[8] == 0);
  CHECK(img.pixels[9] == std::lround(25.5));
  CHECK(img.pixels[2] == 255);
  std::ifstream in(dir / "m.pgm");
  std::string a, b, c;
  in >> a >> b >> c;
  CHECK(a == "P2");
  CHECK(b == "4");
  CHECK(c == "3");

  export_csv(map, (dir / "m.csv").string());
  CHECK(testing::check_saliency_csv((dir / "m.csv").string(), 12) == "");
  const auto back = import_csv((dir / "m.csv").string());
  CHECK(back.bins == 3);
  CHECK(back.frames == 4);
  CHECK(back.values == map.values);

  SaliencyMap flat = map;
  std::fill(flat.values.begin(), flat.values.end(), 0.7);
  export_pgm(flat, (dir / "flat.pgm").string());
  REQUIRE(testing::check_pgm((dir / "flat.pgm").string(), &img) == "");
  CHECK(std::all_of(img.pixels.begin(), img.pixels.end(), [](long v) { return v == 0; }));

  std::ofstream(dir / "shuffled.csv") << "k,t,value\n1,0,5\n0,0,1\n0,1,2\n1,1,7\n";
  const auto shuffled = import_csv((dir / "shuffled.csv").string());
  CHECK(shuffled.values == std::vector<double>{1, 2, 5, 7});
  std::ofstream(dir / "dup.csv") << "k,t,value\n0,0,1\n0,0,2\n";
  CHECK_THROWS_AS(import_csv((dir / "dup.csv").string()), MalformedFileError);
  std::ofstream(dir / "gap.csv") << "k,t,value\n0,0,1\n1,1,2\n";
  CHECK_THROWS_AS(import_csv((dir / "gap.csv").string()), MalformedFileError);
  CHECK_THROWS_AS(export_pgm(map, (dir / "missing" / "x.pgm").string()), FormatError);
}

TEST_CASE("exports of a real map validate") {
  Fixture fx;
  const auto dir = scratch("real");
  const auto map = smoothgrad(fx.model, fx.spec, 0, 2, 0.1, 3);
  export_pgm(map, (dir / "s.pgm").string());
  export_csv(map, (dir / "s.csv").string());
  CHECK(testing::check_pgm((dir / "s.pgm").string()) == "");
  CHECK(testing::check_saliency_csv((dir / "s.csv").string(), map.bins * map.frames) == "");
  CHECK(import_csv((dir / "s.csv").string()).values == map.values);
}
