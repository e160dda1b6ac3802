#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <complex>

#include "ccqt/cli/commands.hpp"
#include "ccqt/cli/config.hpp"
#include "ccqt/dsp/cqt.hpp"
#include "ccqt/dsp/pipeline.hpp"
#include "ccqt/eval/eval.hpp"
#include "ccqt/explain/saliency.hpp"
#include "ccqt/nn/checkpoint.hpp"

namespace py = pybind11;
using namespace ccqt;

namespace {

using RealArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

dsp::AudioClip to_clip(const RealArray& samples, double sample_rate) {
  if (samples.ndim() != 1) throw ShapeError("samples must be one-dimensional");
  dsp::AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.assign(samples.data(), samples.data() + samples.size());
  return clip;
}

py::array_t<std::complex<double>> to_array(const ComplexTensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<std::complex<double>> out(shape);
  auto* dst = out.mutable_data();
  for (std::size_t i = 0; i < t.size(); ++i) dst[i] = t.at(i);
  return out;
}

py::array_t<double> to_array(const explain::SaliencyMap& map) {
  py::array_t<double> out({static_cast<py::ssize_t>(map.bins), static_cast<py::ssize_t>(map.frames)});
  std::copy(map.values.begin(), map.values.end(), out.mutable_data());
  return out;
}

py::dict config_dict(const cli::RunConfig& cfg) {
  py::dict d;
  const auto kv = cfg.to_kv();
  for (const auto& [k, v] : kv.entries()) d[py::str(k)] = v;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Complex-valued CQT anti-spoofing toolkit";

  static py::exception<Error> base(m, "CcqtError");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<cli::UsageError>(m, "UsageError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<StateError>(m, "StateError", base.ptr());

  m.def(
      "cqt",
      [](const RealArray& samples, double sample_rate, double f_min, std::size_t bins_per_octave,
         std::size_t n_bins, std::size_t hop) {
        dsp::CqtConfig cfg;
        cfg.sample_rate = sample_rate;
        cfg.f_min = f_min;
        cfg.bins_per_octave = bins_per_octave;
        cfg.n_bins = n_bins;
        cfg.hop = hop;
        cfg.validate();
        return to_array(dsp::FastCqt(cfg)(to_clip(samples, sample_rate)).data);
      },
      py::arg("samples"), py::arg("sample_rate") = 16000.0, py::arg("f_min") = 32.7,
      py::arg("bins_per_octave") = 12, py::arg("n_bins") = 96, py::arg("hop") = 32,
      "Complex CQT of a mono signal as an (n_bins, frames) array.");

  m.def(
      "compute_eer",
      [](const std::vector<int>& labels, const std::vector<double>& scores) {
        if (labels.size() != scores.size())
          throw ShapeError("labels and scores must have the same length");
        eval::ScoreSet set;
        for (std::size_t i = 0; i < labels.size(); ++i)
          set.push_back({std::to_string(i), labels[i], scores[i]});
        const auto r = eval::compute_eer(set);
        return py::make_tuple(r.eer, r.threshold);
      },
      py::arg("labels"), py::arg("scores"),
      "EER and threshold; label 1 marks spoof, higher scores mean spoof.");

  m.def(
      "load_wav",
      [](const std::string& path) {
        const auto clip = dsp::load_wav(path);
        return py::make_tuple(py::array_t<double>(static_cast<py::ssize_t>(clip.size()),
                                                  clip.samples.data()),
                              clip.sample_rate);
      },
      py::arg("path"));
  m.def(
      "save_wav",
      [](const std::string& path, const RealArray& samples, double sample_rate) {
        dsp::save_wav(to_clip(samples, sample_rate), path);
      },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate") = 16000.0);

  m.def(
      "parse_config",
      [](const std::string& path, const std::vector<std::string>& overrides) {
        return config_dict(cli::parse_config(path, overrides));
      },
      py::arg("path") = "", py::arg("overrides") = std::vector<std::string>{},
      "Resolved configuration as a flat {section.key: value} dict.");

  m.def(
      "run",
      [](const std::string& command, const std::string& out, const std::string& config,
         const std::vector<std::string>& overrides) {
        const auto cfg = cli::parse_config(config, overrides);
        py::gil_scoped_release release;
        return cli::dispatch(command, cfg, out, {});
      },
      py::arg("command"), py::arg("out"), py::arg("config") = "",
      py::arg("overrides") = std::vector<std::string>{},
      "Runs one CLI command and returns its summary line.");

  m.def(
      "saliency",
      [](const std::string& checkpoint, const RealArray& samples, double sample_rate, int target,
         std::size_t n_samples, double sigma, std::uint64_t seed, double clip_duration) {
        auto model = nn::load_checkpoint(checkpoint);
        const dsp::ClipPipeline pipeline(model.features(), {}, clip_duration);
        const auto spec = pipeline.transform(pipeline.eval_window(to_clip(samples, sample_rate)));
        return to_array(explain::smoothgrad(model, spec, target, n_samples, sigma, seed));
      },
      py::arg("checkpoint"), py::arg("samples"), py::arg("sample_rate") = 16000.0,
      py::arg("target") = 1, py::arg("n_samples") = 1, py::arg("sigma") = 0.0,
      py::arg("seed") = 0, py::arg("clip_duration") = 2.0,
      "SmoothGrad map (bins, frames) of the centered window of a clip.");
}
