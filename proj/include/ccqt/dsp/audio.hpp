#pragma once

#include <string>
#include <vector>

namespace ccqt::dsp {

// Mono time-domain signal; samples lie in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  double sample_rate = 16000.0;

  std::size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  // Throws FormatError if a sample is out of range or the rate is not
  // positive.
  void validate() const;
};

AudioClip load_wav(const std::string& path);
// 16-bit PCM mono; samples are clamped to the representable range.
void save_wav(const AudioClip& clip, const std::string& path);

}  // namespace ccqt::dsp
