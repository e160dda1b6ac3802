#pragma once

#include <memory>

#include "ccqt/dsp/audio.hpp"
#include "ccqt/dsp/cqt.hpp"
#include "ccqt/dsp/preprocess.hpp"
#include "ccqt/rng.hpp"

namespace ccqt::dsp {

// Trim → crop/pad → CQT, shared by training and scoring so both see the
// same preprocessing.
class ClipPipeline {
 public:
  ClipPipeline(CqtConfig cqt, TrimConfig trim = {}, double duration_s = 2.0);

  // Silence trimming only; throws InsufficientAudioError on silent clips.
  AudioClip trim(const AudioClip& clip) const;
  // Random window (training) of an already trimmed clip.
  AudioClip random_crop(const AudioClip& trimmed, Rng& rng) const;
  // Trim then centered window, deterministic (scoring).
  AudioClip eval_window(const AudioClip& clip) const;
  ComplexSpectrogram transform(const AudioClip& window) const;

  const CqtConfig& cqt_config() const { return cqt_->config(); }
  double duration_s() const { return duration_s_; }

 private:
  std::shared_ptr<FastCqt> cqt_;
  TrimConfig trim_;
  double duration_s_;
};

// Reduces page-fault cost of the large short-lived buffers the training loop
// allocates by keeping freed memory inside the process. Call once from main.
void tune_allocator();

}  // namespace ccqt::dsp
