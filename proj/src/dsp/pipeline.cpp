#include "ccqt/dsp/pipeline.hpp"

#include <malloc.h>

#include "ccqt/errors.hpp"

namespace ccqt::dsp {

ClipPipeline::ClipPipeline(CqtConfig cqt, TrimConfig trim, double duration_s)
    : cqt_(std::make_shared<FastCqt>(cqt)), trim_(trim), duration_s_(duration_s) {
  if (!(duration_s > 0.0)) throw ConfigError("clip duration must be positive");
  if (cqt_->config().frame_count(static_cast<std::size_t>(duration_s * cqt.sample_rate)) < 16)
    throw ConfigError("clip duration yields fewer than 16 CQT frames");
}

AudioClip ClipPipeline::trim(const AudioClip& clip) const { return trim_silence(clip, trim_); }

AudioClip ClipPipeline::random_crop(const AudioClip& trimmed, Rng& rng) const {
  return crop_or_pad(trimmed, duration_s_, rng);
}

AudioClip ClipPipeline::eval_window(const AudioClip& clip) const {
  return center_crop_or_pad(trim(clip), duration_s_);
}

ComplexSpectrogram ClipPipeline::transform(const AudioClip& window) const {
  return (*cqt_)(window);
}

void tune_allocator() {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
}

}  // namespace ccqt::dsp
