#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ccqt/ctensor/tensor.hpp"
#include "ccqt/dsp/audio.hpp"
#include "ccqt/kv.hpp"
#include "ccqt/nn/model.hpp"
#include "ccqt/rng.hpp"

namespace ccqt::train {

struct AugmentationConfig {
  double p_gain = 0.2;
  double gain_db = 6.0;  // uniform in [-gain_db, +gain_db]
  double p_polarity = 0.2;
  double p_clip = 0.2;
  double clip_threshold = 0.5;  // fraction of the clip's peak
  double p_noise = 0.2;
  double snr_min_db = 10.0;
  double snr_max_db = 40.0;
  double p_time_shift = 0.2;
  double max_shift_s = 0.5;
  double p_freq_mask = 0.2;
  std::size_t freq_mask_max_bins = 8;
  double p_fgsm = 0.2;
  double fgsm_fraction = 0.0025;

  static AugmentationConfig disabled();
  void validate() const;
  void to_kv(KeyValues& kv, const std::string& prefix = "augment.") const;
  static AugmentationConfig from_kv(const KeyValues& kv, const std::string& prefix = "augment.");
};

enum class NoiseColor { kWhite, kPink };

// Individual waveform transforms. None of them clamps; augment() clamps once
// at the end.
dsp::AudioClip apply_gain(const dsp::AudioClip& clip, double gain_db);
dsp::AudioClip invert_polarity(const dsp::AudioClip& clip);
dsp::AudioClip hard_clip(const dsp::AudioClip& clip, double threshold);
// Noise scaled so that signal power / noise power = 10^(snr_db/10). A silent
// clip is returned unchanged.
dsp::AudioClip add_noise(const dsp::AudioClip& clip, double snr_db, NoiseColor color, Rng& rng);
// Circular shift by `samples` (positive delays the signal).
dsp::AudioClip time_shift(const dsp::AudioClip& clip, std::ptrdiff_t samples);

// Gain → polarity → clipping → noise → time shift, each firing with its own
// probability, then clamped to [-1, 1]. Length is preserved.
dsp::AudioClip augment(const dsp::AudioClip& clip, const AugmentationConfig& cfg, Rng& rng);

// Zeroes rows [start, start + width) of an (F, T) spectrogram in place.
void frequency_mask(ComplexTensor& spec, std::size_t start, std::size_t width);
// Spectrogram-domain stage: with probability p_freq_mask, masks a band of
// 1..freq_mask_max_bins rows at a uniform position.
void augment_spectrogram(ComplexTensor& spec, const AugmentationConfig& cfg, Rng& rng);

// z + ε'·(sign(g_re) + i·sign(g_im)) with ε' = fraction · mean|z|; sign(0) = 0.
ComplexTensor fgsm_perturb(const ComplexTensor& batch, std::span<const double> grad_re,
                           std::span<const double> grad_im, double fraction);

// Gradient of the batch cross-entropy with respect to the (B, 1, F, T) input,
// taken in training mode with `dropout_rng` and without touching the BN
// running statistics, followed by fgsm_perturb. Parameter gradients are
// neither computed nor modified.
ComplexTensor fgsm_example(const ComplexTensor& batch, const std::vector<int>& labels,
                           nn::Model& model, double fraction, Rng& dropout_rng);

}  // namespace ccqt::train
