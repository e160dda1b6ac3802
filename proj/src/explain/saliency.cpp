#include "ccqt/explain/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "ccqt/ctensor/autograd.hpp"
#include "ccqt/ctensor/ops.hpp"
#include "ccqt/errors.hpp"
#include "ccqt/kv.hpp"

namespace ccqt::explain {

namespace {

void check_input(const nn::Model& model, const dsp::ComplexSpectrogram& spec, int target_class) {
  if (spec.phase_mode != dsp::PhaseMode::kFull)
    throw StateError("saliency needs a full-phase spectrogram");
  if (spec.data.rank() != 2 || spec.bins() != model.features().n_bins)
    throw ShapeError("saliency input must be (" + std::to_string(model.features().n_bins) +
                     ", T), got " + shape_string(spec.data.shape()));
  if (target_class != 0 && target_class != 1)
    throw ConfigError("target class must be 0 or 1");
  if (!model.has_bn_stats())
    throw StateError("saliency needs a trained model (no batch-norm running statistics)");
}

std::vector<double> gradient_norms(nn::Model& model, const ComplexTensor& z, int target_class) {
  auto params = model.parameters();
  for (auto& p : params) p.tensor.set_requires_grad(false);
  struct Restore {
    std::vector<nn::NamedTensor>& params;
    ~Restore() {
      for (auto& p : params) p.tensor.set_requires_grad(true);
    }
  } restore{params};

  const std::size_t f = z.dim(0), t = z.dim(1);
  auto input = z.reshape({1, 1, f, t}).detach();
  input.set_requires_grad(true);
  const auto out = model.forward(input, nn::Mode::kEval);
  std::vector<double> pick(2, 0.0);
  pick[static_cast<std::size_t>(target_class)] = 1.0;
  const auto y = sum(mul(magnitude(out.logits), ComplexTensor::from_real({1, 2}, pick)));
  backward(y);
  const auto gre = input.grad_real();
  const auto gim = input.grad_imag();
  std::vector<double> values(f * t);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::hypot(gre[i], gim[i]);
    if (!std::isfinite(values[i]))
      throw NonFiniteError("saliency: non-finite gradient at bin " + std::to_string(i / t) +
                           ", frame " + std::to_string(i % t));
  }
  return values;
}

}  // namespace

SaliencyMap saliency(nn::Model& model, const dsp::ComplexSpectrogram& spec, int target_class) {
  check_input(model, spec, target_class);
  SaliencyMap map;
  map.bins = spec.bins();
  map.frames = spec.frames();
  map.target_class = target_class;
  map.values = gradient_norms(model, spec.data, target_class);
  return map;
}

namespace {

void check_smoothgrad(double sigma) {
  if (!(sigma >= 0.0 && std::isfinite(sigma)))
    throw ConfigError("smoothgrad sigma must be finite and non-negative");
}

std::vector<double> sample_map(nn::Model& model, const ComplexTensor& z, int target_class,
                               double stddev, std::uint64_t seed, std::size_t index) {
  if (stddev == 0.0) return gradient_norms(model, z, target_class);
  auto rng = make_rng(seed, {index});
  std::normal_distribution<double> noise(0.0, stddev);
  std::vector<double> re(z.real().begin(), z.real().end()), im(z.imag().begin(), z.imag().end());
  for (auto& v : re) v += noise(rng);
  for (auto& v : im) v += noise(rng);
  return gradient_norms(model, ComplexTensor::from_planes(z.shape(), std::move(re), std::move(im)),
                        target_class);
}

double peak_magnitude(const ComplexTensor& z) {
  double peak = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i)
    peak = std::max(peak, std::hypot(z.real()[i], z.imag()[i]));
  return peak;
}

}  // namespace

SaliencyMap noisy_saliency(nn::Model& model, const dsp::ComplexSpectrogram& spec, int target_class,
                           double sigma, std::uint64_t seed, std::size_t index) {
  check_input(model, spec, target_class);
  check_smoothgrad(sigma);
  SaliencyMap map;
  map.bins = spec.bins();
  map.frames = spec.frames();
  map.target_class = target_class;
  map.sigma = sigma;
  map.values = sample_map(model, spec.data, target_class, sigma * peak_magnitude(spec.data), seed,
                          index);
  return map;
}

SaliencyMap smoothgrad(nn::Model& model, const dsp::ComplexSpectrogram& spec, int target_class,
                       std::size_t n, double sigma, std::uint64_t seed) {
  check_input(model, spec, target_class);
  if (n < 1) throw ConfigError("smoothgrad needs at least one sample");
  check_smoothgrad(sigma);
  const double stddev = sigma * peak_magnitude(spec.data);
  SaliencyMap map;
  map.bins = spec.bins();
  map.frames = spec.frames();
  map.target_class = target_class;
  map.n_samples = n;
  map.sigma = sigma;
  map.values.assign(spec.data.size(), 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const auto values = sample_map(model, spec.data, target_class, stddev, seed, s);
    for (std::size_t i = 0; i < values.size(); ++i) map.values[i] += values[i];
  }
  for (auto& v : map.values) v /= static_cast<double>(n);
  return map;
}

void export_pgm(const SaliencyMap& map, const std::string& path) {
  if (map.values.size() != map.bins * map.frames || map.values.empty())
    throw ShapeError("saliency map values do not match its shape");
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  const auto [lo, hi] = std::minmax_element(map.values.begin(), map.values.end());
  const double range = *hi - *lo;
  out << "P2\n" << map.frames << ' ' << map.bins << "\n255\n";
  for (std::size_t row = 0; row < map.bins; ++row) {
    const std::size_t k = map.bins - 1 - row;
    for (std::size_t t = 0; t < map.frames; ++t) {
      const long level = range > 0.0 ? std::lround(255.0 * (map.at(k, t) - *lo) / range) : 0;
      out << (t ? " " : "") << level;
    }
    out << '\n';
  }
  if (!out) throw FormatError("write failed for '" + path + "'");
}

void export_csv(const SaliencyMap& map, const std::string& path) {
  if (map.values.size() != map.bins * map.frames)
    throw ShapeError("saliency map values do not match its shape");
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << "k,t,value\n";
  char buf[96];
  for (std::size_t k = 0; k < map.bins; ++k)
    for (std::size_t t = 0; t < map.frames; ++t) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g\n", k, t, map.at(k, t));
      out << buf;
    }
  if (!out) throw FormatError("write failed for '" + path + "'");
}

SaliencyMap import_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || trim(line) != "k,t,value")
    throw MalformedFileError(path + ": expected header 'k,t,value'");
  struct Row {
    std::size_t k, t;
    double v;
  };
  std::vector<Row> rows;
  std::size_t lineno = 1, bins = 0, frames = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    const std::string where = path + ":" + std::to_string(lineno);
    if (c2 == std::string::npos) throw MalformedFileError(where + ": expected 3 fields");
    Row r{};
    try {
      const auto k = parse_int(trim(std::string_view(line).substr(0, c1)), "k");
      const auto t = parse_int(trim(std::string_view(line).substr(c1 + 1, c2 - c1 - 1)), "t");
      if (k < 0 || t < 0) throw ConfigError("indices must be non-negative");
      r = {static_cast<std::size_t>(k), static_cast<std::size_t>(t),
           parse_double(trim(std::string_view(line).substr(c2 + 1)), "value")};
    } catch (const ConfigError& e) {
      throw MalformedFileError(where + ": " + e.what());
    }
    bins = std::max(bins, r.k + 1);
    frames = std::max(frames, r.t + 1);
    rows.push_back(r);
  }
  if (rows.size() != bins * frames)
    throw MalformedFileError(path + ": " + std::to_string(rows.size()) + " rows do not cover a " +
                             std::to_string(bins) + "x" + std::to_string(frames) + " grid");
  SaliencyMap map;
  map.bins = bins;
  map.frames = frames;
  map.values.assign(bins * frames, 0.0);
  std::vector<bool> seen(bins * frames, false);
  for (const auto& r : rows) {
    const std::size_t i = r.k * frames + r.t;
    if (seen[i])
      throw MalformedFileError(path + ": duplicate entry k=" + std::to_string(r.k) +
                               " t=" + std::to_string(r.t));
    seen[i] = true;
    map.values[i] = r.v;
  }
  return map;
}

}  // namespace ccqt::explain
