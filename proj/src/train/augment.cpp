#include "ccqt/train/augment.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ccqt/ctensor/autograd.hpp"
#include "ccqt/errors.hpp"

namespace ccqt::train {

AugmentationConfig AugmentationConfig::disabled() {
  AugmentationConfig c;
  c.p_gain = c.p_polarity = c.p_clip = c.p_noise = c.p_time_shift = 0.0;
  c.p_freq_mask = c.p_fgsm = 0.0;
  return c;
}

void AugmentationConfig::validate() const {
  const std::pair<const char*, double> probs[] = {
      {"p_gain", p_gain},   {"p_polarity", p_polarity},     {"p_clip", p_clip},
      {"p_noise", p_noise}, {"p_time_shift", p_time_shift}, {"p_freq_mask", p_freq_mask},
      {"p_fgsm", p_fgsm}};
  for (const auto& [name, p] : probs)
    if (!(p >= 0.0 && p <= 1.0))
      throw ConfigError(std::string("augment.") + name + " must lie in [0, 1]");
  if (!(gain_db >= 0.0 && std::isfinite(gain_db)))
    throw ConfigError("augment.gain_db must be finite and non-negative");
  if (!(clip_threshold > 0.0 && clip_threshold <= 1.0))
    throw ConfigError("augment.clip_threshold must lie in (0, 1]");
  if (!(std::isfinite(snr_min_db) && std::isfinite(snr_max_db) && snr_min_db <= snr_max_db))
    throw ConfigError("augment.snr_min_db must be finite and not above augment.snr_max_db");
  if (!(max_shift_s >= 0.0 && std::isfinite(max_shift_s)))
    throw ConfigError("augment.max_shift_s must be finite and non-negative");
  if (!(fgsm_fraction > 0.0 && std::isfinite(fgsm_fraction)))
    throw ConfigError("augment.fgsm_fraction must be positive");
}

void AugmentationConfig::to_kv(KeyValues& kv, const std::string& prefix) const {
  kv.set(prefix + "p_gain", format_double(p_gain));
  kv.set(prefix + "gain_db", format_double(gain_db));
  kv.set(prefix + "p_polarity", format_double(p_polarity));
  kv.set(prefix + "p_clip", format_double(p_clip));
  kv.set(prefix + "clip_threshold", format_double(clip_threshold));
  kv.set(prefix + "p_noise", format_double(p_noise));
  kv.set(prefix + "snr_min_db", format_double(snr_min_db));
  kv.set(prefix + "snr_max_db", format_double(snr_max_db));
  kv.set(prefix + "p_time_shift", format_double(p_time_shift));
  kv.set(prefix + "max_shift_s", format_double(max_shift_s));
  kv.set(prefix + "p_freq_mask", format_double(p_freq_mask));
  kv.set(prefix + "freq_mask_max_bins", std::to_string(freq_mask_max_bins));
  kv.set(prefix + "p_fgsm", format_double(p_fgsm));
  kv.set(prefix + "fgsm_fraction", format_double(fgsm_fraction));
}

AugmentationConfig AugmentationConfig::from_kv(const KeyValues& kv, const std::string& prefix) {
  AugmentationConfig c;
  c.p_gain = kv.get_double(prefix + "p_gain");
  c.gain_db = kv.get_double(prefix + "gain_db");
  c.p_polarity = kv.get_double(prefix + "p_polarity");
  c.p_clip = kv.get_double(prefix + "p_clip");
  c.clip_threshold = kv.get_double(prefix + "clip_threshold");
  c.p_noise = kv.get_double(prefix + "p_noise");
  c.snr_min_db = kv.get_double(prefix + "snr_min_db");
  c.snr_max_db = kv.get_double(prefix + "snr_max_db");
  c.p_time_shift = kv.get_double(prefix + "p_time_shift");
  c.max_shift_s = kv.get_double(prefix + "max_shift_s");
  c.p_freq_mask = kv.get_double(prefix + "p_freq_mask");
  const auto bins = kv.get_int(prefix + "freq_mask_max_bins");
  if (bins < 0) throw ConfigError(prefix + "freq_mask_max_bins must be non-negative");
  c.freq_mask_max_bins = static_cast<std::size_t>(bins);
  c.p_fgsm = kv.get_double(prefix + "p_fgsm");
  c.fgsm_fraction = kv.get_double(prefix + "fgsm_fraction");
  return c;
}

dsp::AudioClip apply_gain(const dsp::AudioClip& clip, double gain_db) {
  auto out = clip;
  const double g = std::pow(10.0, gain_db / 20.0);
  for (double& v : out.samples) v *= g;
  return out;
}

dsp::AudioClip invert_polarity(const dsp::AudioClip& clip) {
  auto out = clip;
  for (double& v : out.samples) v = -v;
  return out;
}

dsp::AudioClip hard_clip(const dsp::AudioClip& clip, double threshold) {
  auto out = clip;
  for (double& v : out.samples) v = std::clamp(v, -threshold, threshold);
  return out;
}

dsp::AudioClip add_noise(const dsp::AudioClip& clip, double snr_db, NoiseColor color, Rng& rng) {
  auto out = clip;
  const std::size_t n = clip.size();
  double signal = 0.0;
  for (double v : clip.samples) signal += v * v;
  if (n == 0 || signal == 0.0) return out;
  std::normal_distribution<double> normal;
  std::vector<double> noise(n);
  if (color == NoiseColor::kWhite) {
    for (double& v : noise) v = normal(rng);
  } else {
    // Paul Kellet's economy 1/f filter.
    double b0 = 0.0, b1 = 0.0, b2 = 0.0;
    for (double& v : noise) {
      const double w = normal(rng);
      b0 = 0.99765 * b0 + w * 0.0990460;
      b1 = 0.96300 * b1 + w * 0.2965164;
      b2 = 0.57000 * b2 + w * 1.0526913;
      v = b0 + b1 + b2 + w * 0.1848;
    }
  }
  double power = 0.0;
  for (double v : noise) power += v * v;
  if (power == 0.0) return out;
  const double scale = std::sqrt(signal / power / std::pow(10.0, snr_db / 10.0));
  for (std::size_t i = 0; i < n; ++i) out.samples[i] += scale * noise[i];
  return out;
}

dsp::AudioClip time_shift(const dsp::AudioClip& clip, std::ptrdiff_t samples) {
  auto out = clip;
  const auto n = static_cast<std::ptrdiff_t>(clip.size());
  if (n == 0) return out;
  const std::ptrdiff_t k = ((samples % n) + n) % n;
  std::rotate(out.samples.begin(), out.samples.end() - k, out.samples.end());
  return out;
}

dsp::AudioClip augment(const dsp::AudioClip& clip, const AugmentationConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Every draw happens unconditionally so the stream position does not
  // depend on which transforms fired.
  const double u_gain = unit(rng), gain = (2.0 * unit(rng) - 1.0) * cfg.gain_db;
  const double u_pol = unit(rng);
  const double u_clip = unit(rng);
  const double u_noise = unit(rng), snr = cfg.snr_min_db + unit(rng) * (cfg.snr_max_db - cfg.snr_min_db);
  const bool pink = unit(rng) < 0.5;
  const double u_shift = unit(rng), shift = (2.0 * unit(rng) - 1.0) * cfg.max_shift_s;
  auto noise_rng = Rng(rng());

  auto out = clip;
  if (u_gain < cfg.p_gain) out = apply_gain(out, gain);
  if (u_pol < cfg.p_polarity) out = invert_polarity(out);
  if (u_clip < cfg.p_clip) {
    double peak = 0.0;
    for (double v : out.samples) peak = std::max(peak, std::abs(v));
    out = hard_clip(out, cfg.clip_threshold * peak);
  }
  if (u_noise < cfg.p_noise)
    out = add_noise(out, snr, pink ? NoiseColor::kPink : NoiseColor::kWhite, noise_rng);
  if (u_shift < cfg.p_time_shift)
    out = time_shift(out, static_cast<std::ptrdiff_t>(std::llround(shift * clip.sample_rate)));
  for (double& v : out.samples) v = std::clamp(v, -1.0, 1.0);
  return out;
}

void frequency_mask(ComplexTensor& spec, std::size_t start, std::size_t width) {
  if (spec.rank() != 2) throw ShapeError("frequency_mask expects an (F, T) tensor");
  const std::size_t f = spec.dim(0), t = spec.dim(1);
  const std::size_t end = std::min(f, start + width);
  auto re = spec.real_mut();
  auto im = spec.imag_mut();
  for (std::size_t k = std::min(start, f); k < end; ++k)
    for (std::size_t j = 0; j < t; ++j) re[k * t + j] = im[k * t + j] = 0.0;
}

void augment_spectrogram(ComplexTensor& spec, const AugmentationConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  const double pos = unit(rng), w = unit(rng);
  if (!(u < cfg.p_freq_mask) || cfg.freq_mask_max_bins == 0) return;
  const std::size_t f = spec.dim(0);
  const std::size_t width = std::min(
      f, 1 + static_cast<std::size_t>(w * static_cast<double>(cfg.freq_mask_max_bins)) %
                 cfg.freq_mask_max_bins);
  const std::size_t start =
      static_cast<std::size_t>(pos * static_cast<double>(f - width + 1)) % (f - width + 1);
  frequency_mask(spec, start, width);
}

ComplexTensor fgsm_perturb(const ComplexTensor& batch, std::span<const double> grad_re,
                           std::span<const double> grad_im, double fraction) {
  const std::size_t n = batch.size();
  if (grad_re.size() != n || grad_im.size() != n)
    throw ShapeError("fgsm gradient does not match the batch");
  const auto re = batch.real();
  const auto im = batch.imag();
  double mag = 0.0;
  for (std::size_t i = 0; i < n; ++i) mag += std::hypot(re[i], im[i]);
  const double eps = n == 0 ? 0.0 : fraction * mag / static_cast<double>(n);
  auto sign = [](double g) { return static_cast<double>((g > 0.0) - (g < 0.0)); };
  std::vector<double> out_re(n), out_im(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grad_re[i]) || !std::isfinite(grad_im[i]))
      throw NonFiniteError("fgsm: non-finite input gradient at element " + std::to_string(i));
    out_re[i] = re[i] + eps * sign(grad_re[i]);
    out_im[i] = im[i] + eps * sign(grad_im[i]);
  }
  return ComplexTensor::from_planes(batch.shape(), std::move(out_re), std::move(out_im));
}

ComplexTensor fgsm_example(const ComplexTensor& batch, const std::vector<int>& labels,
                           nn::Model& model, double fraction, Rng& dropout_rng) {
  auto params = model.parameters();
  for (auto& p : params) p.tensor.set_requires_grad(false);
  struct Restore {
    std::vector<nn::NamedTensor>& params;
    ~Restore() {
      for (auto& p : params) p.tensor.set_requires_grad(true);
    }
  } restore{params};

  auto input = batch.detach();
  input.set_requires_grad(true);
  auto out = model.forward(input, nn::Mode::kTrain, &dropout_rng, /*update_bn_stats=*/false);
  auto loss = nn::cross_entropy(out.logits, labels);
  loss.check_finite("fgsm loss");
  backward(loss);
  return fgsm_perturb(batch, input.grad_real(), input.grad_imag(), fraction);
}

}  // namespace ccqt::train
