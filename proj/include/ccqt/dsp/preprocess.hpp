#pragma once

#include "ccqt/dsp/audio.hpp"
#include "ccqt/rng.hpp"

namespace ccqt::dsp {

struct TrimConfig {
  double threshold_db = 35.0;  // below the loudest frame's RMS
  double frame_ms = 25.0;
  double hop_ms = 10.0;
};

// Drops leading and trailing frames whose RMS is more than threshold_db below
// the loudest frame. Interior samples are untouched; when the last frame is
// kept, the partial tail after it is kept too.
AudioClip trim_silence(const AudioClip& clip, const TrimConfig& cfg = {});

// Random window of exactly round(duration_s · rate) samples when the clip is
// longer, wrap-around tiling when it is shorter, a copy when equal.
AudioClip crop_or_pad(const AudioClip& clip, double duration_s, Rng& rng);

// Deterministic variant used for scoring: the centered window.
AudioClip center_crop_or_pad(const AudioClip& clip, double duration_s);

}  // namespace ccqt::dsp
