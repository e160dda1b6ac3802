#include "ccqt/dsp/preprocess.hpp"

#include <cmath>

#include "ccqt/errors.hpp"

namespace ccqt::dsp {

namespace {

std::size_t target_length(const AudioClip& clip, double duration_s) {
  if (!(duration_s > 0.0)) throw ConfigError("crop duration must be positive");
  if (clip.samples.empty()) throw InsufficientAudioError("cannot crop an empty clip");
  const auto n = static_cast<std::size_t>(std::llround(duration_s * clip.sample_rate));
  if (n == 0) throw ConfigError("crop duration shorter than one sample");
  return n;
}

AudioClip window_or_tile(const AudioClip& clip, std::size_t target, std::size_t start) {
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  const auto len = clip.samples.size();
  if (len >= target) {
    out.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(start),
                       clip.samples.begin() + static_cast<std::ptrdiff_t>(start + target));
  } else {
    out.samples.resize(target);
    for (std::size_t i = 0; i < target; ++i) out.samples[i] = clip.samples[i % len];
  }
  return out;
}

}  // namespace

AudioClip trim_silence(const AudioClip& clip, const TrimConfig& cfg) {
  const auto n = clip.samples.size();
  if (n == 0) throw InsufficientAudioError("cannot trim an empty clip");
  auto frame = static_cast<std::size_t>(std::lround(cfg.frame_ms * clip.sample_rate / 1000.0));
  const auto hop = static_cast<std::size_t>(
      std::max(1L, std::lround(cfg.hop_ms * clip.sample_rate / 1000.0)));
  frame = std::clamp<std::size_t>(frame, 1, n);
  const std::size_t n_frames = (n - frame) / hop + 1;

  std::vector<double> rms(n_frames);
  double peak = 0.0;
  for (std::size_t f = 0; f < n_frames; ++f) {
    double acc = 0.0;
    for (std::size_t i = f * hop; i < f * hop + frame; ++i)
      acc += clip.samples[i] * clip.samples[i];
    rms[f] = std::sqrt(acc / static_cast<double>(frame));
    peak = std::max(peak, rms[f]);
  }
  if (peak == 0.0) throw InsufficientAudioError("clip is entirely silent");
  const double floor = peak * std::pow(10.0, -cfg.threshold_db / 20.0);

  std::size_t first = 0;
  while (rms[first] < floor) ++first;
  std::size_t last = n_frames - 1;
  while (rms[last] < floor) --last;

  const std::size_t begin = first * hop;
  const std::size_t end = last == n_frames - 1 ? n : last * hop + frame;
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                     clip.samples.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

AudioClip crop_or_pad(const AudioClip& clip, double duration_s, Rng& rng) {
  const auto target = target_length(clip, duration_s);
  std::size_t start = 0;
  if (clip.samples.size() > target) {
    std::uniform_int_distribution<std::size_t> pick(0, clip.samples.size() - target);
    start = pick(rng);
  }
  return window_or_tile(clip, target, start);
}

AudioClip center_crop_or_pad(const AudioClip& clip, double duration_s) {
  const auto target = target_length(clip, duration_s);
  const std::size_t start =
      clip.samples.size() > target ? (clip.samples.size() - target) / 2 : 0;
  return window_or_tile(clip, target, start);
}

}  // namespace ccqt::dsp
