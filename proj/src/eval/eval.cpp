#include "ccqt/eval/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "ccqt/ctensor/autograd.hpp"
#include "ccqt/dsp/features.hpp"
#include "ccqt/errors.hpp"

namespace ccqt::eval {

EerResult compute_eer(const ScoreSet& scores) {
  EerResult r;
  std::vector<double> bona, spoof;
  for (const auto& e : scores) {
    if (!std::isfinite(e.score))
      throw ConfigError("score for '" + e.clip_id + "' is not finite");
    if (e.label == 0)
      bona.push_back(e.score);
    else if (e.label == 1)
      spoof.push_back(e.score);
    else
      throw ConfigError("label for '" + e.clip_id + "' must be 0 or 1");
  }
  r.n_bona_fide = bona.size();
  r.n_spoof = spoof.size();
  if (bona.empty() || spoof.empty())
    throw ConfigError("EER needs at least one bona fide and one spoof score");
  std::sort(bona.begin(), bona.end());
  std::sort(spoof.begin(), spoof.end());

  std::vector<double> thresholds;
  thresholds.reserve(bona.size() + spoof.size() + 1);
  std::merge(bona.begin(), bona.end(), spoof.begin(), spoof.end(), std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(std::numeric_limits<double>::infinity());

  const double nb = static_cast<double>(bona.size());
  const double ns = static_cast<double>(spoof.size());
  auto far = [&](double t) {
    return static_cast<double>(std::lower_bound(spoof.begin(), spoof.end(), t) - spoof.begin()) / ns;
  };
  auto frr = [&](double t) {
    return static_cast<double>(bona.end() - std::lower_bound(bona.begin(), bona.end(), t)) / nb;
  };

  double prev_far = far(thresholds[0]), prev_frr = frr(thresholds[0]);
  if (prev_frr - prev_far <= 0.0) {
    r.eer = prev_far;
    r.threshold = thresholds[0];
    return r;
  }
  for (std::size_t j = 1; j < thresholds.size(); ++j) {
    const double a = far(thresholds[j]), b = frr(thresholds[j]);
    const double d = b - a;
    if (d <= 0.0) {
      const double d0 = prev_frr - prev_far;
      const double lambda = d0 / (d0 - d);
      r.eer = prev_far + lambda * (a - prev_far);
      const double hi = std::isfinite(thresholds[j]) ? thresholds[j] : thresholds[j - 1];
      r.threshold = thresholds[j - 1] + lambda * (hi - thresholds[j - 1]);
      return r;
    }
    prev_far = a;
    prev_frr = b;
  }
  // Unreachable: at +inf FAR = 1 and FRR = 0.
  throw StateError("EER sweep did not cross");
}

ScoreSet score_spectrograms(nn::Model& model, const std::vector<ComplexTensor>& specs,
                            const std::vector<train::LabeledClip>& clips, dsp::PhaseMode mode,
                            std::uint64_t seed, std::size_t batch_size) {
  if (specs.size() != clips.size()) throw ShapeError("one spectrogram per clip expected");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!model.has_bn_stats())
    throw StateError("scoring needs a trained model (no batch-norm running statistics)");
  NoGradGuard no_grad;
  ScoreSet out;
  out.reserve(clips.size());
  for (std::size_t start = 0; start < specs.size(); start += batch_size) {
    const std::size_t b = std::min(batch_size, specs.size() - start);
    const std::size_t f = specs[start].dim(0), t = specs[start].dim(1);
    std::vector<double> re, im;
    re.reserve(b * f * t);
    im.reserve(b * f * t);
    for (std::size_t i = start; i < start + b; ++i) {
      if (specs[i].shape() != specs[start].shape())
        throw ShapeError("spectrograms in a scoring batch must share one shape");
      dsp::ComplexSpectrogram s{specs[i], model.features(), dsp::PhaseMode::kFull};
      auto rng = make_rng(seed, {i});
      const auto ablated = dsp::phase_ablate(s, mode, rng);
      re.insert(re.end(), ablated.data.real().begin(), ablated.data.real().end());
      im.insert(im.end(), ablated.data.imag().begin(), ablated.data.imag().end());
    }
    auto batch = ComplexTensor::from_planes({b, 1, f, t}, std::move(re), std::move(im));
    const auto result = model.forward(batch, nn::Mode::kEval);
    const auto probs = result.scores.real();
    for (std::size_t i = 0; i < b; ++i) {
      const double p = probs[i * 2 + 1];
      if (!std::isfinite(p))
        throw NonFiniteError("non-finite score for clip '" + clips[start + i].id + "'");
      out.push_back({clips[start + i].id, clips[start + i].label, p});
    }
  }
  return out;
}

namespace {

std::vector<ComplexTensor> eval_spectrograms(const std::vector<train::LabeledClip>& clips,
                                             const dsp::ClipPipeline& pipeline) {
  std::vector<ComplexTensor> specs;
  specs.reserve(clips.size());
  for (const auto& c : clips) {
    try {
      specs.push_back(pipeline.transform(pipeline.eval_window(c.clip)).data);
    } catch (const InsufficientAudioError& e) {
      throw InsufficientAudioError("clip '" + c.id + "': " + e.what());
    }
  }
  return specs;
}

}  // namespace

ScoreSet score(nn::Model& model, const std::vector<train::LabeledClip>& clips,
               const dsp::ClipPipeline& pipeline, dsp::PhaseMode mode, std::uint64_t seed,
               std::size_t batch_size) {
  return score_spectrograms(model, eval_spectrograms(clips, pipeline), clips, mode, seed,
                            batch_size);
}

const ModeResult& EvalReport::at(dsp::PhaseMode mode) const {
  for (const auto& m : modes)
    if (m.mode == mode) return m;
  throw StateError(std::string("report has no entry for phase mode ") +
                   dsp::phase_mode_name(mode));
}

std::string EvalReport::ordering() const {
  std::vector<const ModeResult*> sorted;
  for (const auto& m : modes) sorted.push_back(&m);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ModeResult* a, const ModeResult* b) { return a->eer.eer < b->eer.eer; });
  std::string out;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i > 0) out += sorted[i - 1]->eer.eer == sorted[i]->eer.eer ? " = " : " < ";
    out += dsp::phase_mode_name(sorted[i]->mode);
  }
  return out;
}

AblationRun ablation_suite(nn::Model& model, const std::vector<train::LabeledClip>& clips,
                           const dsp::ClipPipeline& pipeline, std::uint64_t seed) {
  const auto specs = eval_spectrograms(clips, pipeline);
  AblationRun run;
  for (auto mode : {dsp::PhaseMode::kFull, dsp::PhaseMode::kZero, dsp::PhaseMode::kRandom}) {
    auto scores = score_spectrograms(model, specs, clips, mode, seed);
    run.report.modes.push_back({mode, compute_eer(scores)});
    run.scores.push_back(std::move(scores));
  }
  return run;
}

void write_scores_csv(const ScoreSet& scores, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write score file '" + path + "'");
  out << "clip_id,label,score\n";
  char buf[64];
  for (const auto& e : scores) {
    if (e.clip_id.find_first_of(",\n\"") != std::string::npos)
      throw FormatError("clip id '" + e.clip_id + "' cannot be written to CSV");
    std::snprintf(buf, sizeof buf, "%.17g", e.score);
    out << e.clip_id << ',' << e.label << ',' << buf << '\n';
  }
  if (!out) throw FormatError("write failed for '" + path + "'");
}

ScoreSet read_scores_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open score file '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || trim(line) != "clip_id,label,score")
    throw MalformedFileError(path + ": expected header 'clip_id,label,score'");
  ScoreSet out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    const auto c2 = line.rfind(',');
    const auto c1 = c2 == std::string::npos || c2 == 0 ? std::string::npos : line.rfind(',', c2 - 1);
    if (c1 == std::string::npos) throw MalformedFileError(where + ": expected 3 fields");
    ScoreEntry e;
    e.clip_id = line.substr(0, c1);
    try {
      e.label = static_cast<int>(parse_int(trim(std::string_view(line).substr(c1 + 1, c2 - c1 - 1)), "label"));
      e.score = parse_double(trim(std::string_view(line).substr(c2 + 1)), "score");
    } catch (const ConfigError& err) {
      throw MalformedFileError(where + ": " + err.what());
    }
    if (e.label != 0 && e.label != 1) throw MalformedFileError(where + ": label must be 0 or 1");
    if (!(e.score >= 0.0 && e.score <= 1.0))
      throw MalformedFileError(where + ": score must lie in [0, 1]");
    out.push_back(std::move(e));
  }
  return out;
}

void write_report_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write report '" + path + "'");
  out << "mode,eer,threshold,n_bona_fide,n_spoof\n";
  char buf[128];
  for (const auto& m : report.modes) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%zu,%zu\n", dsp::phase_mode_name(m.mode),
                  m.eer.eer, m.eer.threshold, m.eer.n_bona_fide, m.eer.n_spoof);
    out << buf;
  }
  if (!out) throw FormatError("write failed for '" + path + "'");
}

std::string format_report(const EvalReport& report, const std::string& title) {
  std::string out = title + "\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-14s %10s %11s %8s %8s\n", "Phase", "EER (%)", "threshold",
                "bona", "spoof");
  out += buf;
  for (const auto& m : report.modes) {
    std::snprintf(buf, sizeof buf, "%-14s %10.2f %11.4f %8zu %8zu\n", dsp::phase_mode_name(m.mode),
                  100.0 * m.eer.eer, m.eer.threshold, m.eer.n_bona_fide, m.eer.n_spoof);
    out += buf;
  }
  if (report.modes.size() > 1) out += "ordering: " + report.ordering() + "\n";
  return out;
}

}  // namespace ccqt::eval
