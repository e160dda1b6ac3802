#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccqt/dsp/cqt.hpp"
#include "ccqt/dsp/pipeline.hpp"
#include "ccqt/nn/model.hpp"
#include "ccqt/train/dataset.hpp"

namespace ccqt::eval {

struct ScoreEntry {
  std::string clip_id;
  int label = 0;       // 0 bona fide, 1 spoof
  double score = 0.0;  // spoof-class probability
};

using ScoreSet = std::vector<ScoreEntry>;

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
  std::size_t n_bona_fide = 0;
  std::size_t n_spoof = 0;
};

// Threshold sweep over the distinct scores plus +inf. A clip is called spoof
// when score >= t: FAR(t) = share of spoof clips below t, FRR(t) = share of
// bona fide clips at or above t. FRR − FAR starts positive and ends
// negative; the EER is read at the first threshold where it reaches zero,
// linearly interpolating between that threshold and the previous one when
// the step functions do not meet exactly. Throws ConfigError unless both
// labels are present and every score is finite.
EerResult compute_eer(const ScoreSet& scores);

// Trim, center crop, CQT, phase mode, eval-mode forward in batches. In
// random mode clip i draws its phases from derive_seed(seed, {i}).
ScoreSet score(nn::Model& model, const std::vector<train::LabeledClip>& clips,
               const dsp::ClipPipeline& pipeline, dsp::PhaseMode mode, std::uint64_t seed = 0,
               std::size_t batch_size = 32);

// Same, on precomputed full-phase spectrograms (one per clip, (F, T)).
ScoreSet score_spectrograms(nn::Model& model, const std::vector<ComplexTensor>& specs,
                            const std::vector<train::LabeledClip>& clips, dsp::PhaseMode mode,
                            std::uint64_t seed = 0, std::size_t batch_size = 32);

struct ModeResult {
  dsp::PhaseMode mode = dsp::PhaseMode::kFull;
  EerResult eer;
};

struct EvalReport {
  std::vector<ModeResult> modes;
  const ModeResult& at(dsp::PhaseMode mode) const;
  // e.g. "full < zero < random", by EER; ties keep full/zero/random order.
  std::string ordering() const;
};

struct AblationRun {
  EvalReport report;
  std::vector<ScoreSet> scores;  // parallel to report.modes
};

// Scores the clips under full, zero and random phase (random seeded by
// `seed`) with one model.
AblationRun ablation_suite(nn::Model& model, const std::vector<train::LabeledClip>& clips,
                           const dsp::ClipPipeline& pipeline, std::uint64_t seed);

void write_scores_csv(const ScoreSet& scores, const std::string& path);
ScoreSet read_scores_csv(const std::string& path);

// Header `mode,eer,threshold,n_bona_fide,n_spoof`.
void write_report_csv(const EvalReport& report, const std::string& path);
std::string format_report(const EvalReport& report, const std::string& title);

}  // namespace ccqt::eval
