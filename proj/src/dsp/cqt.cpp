#include "ccqt/dsp/cqt.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ccqt/errors.hpp"

namespace ccqt::dsp {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Guards FFTW planner calls, which are not thread-safe.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <class T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (!p) throw std::bad_alloc();
  return FftwBuffer<T>(p);
}

struct PlanDeleter {
  void operator()(fftw_plan p) const {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};
using PlanHandle = std::unique_ptr<std::remove_pointer_t<fftw_plan>, PlanDeleter>;

// Windowed, normalized analysis kernel (1/N_k) W_k[n] e^(−2πiQn/N_k).
struct BinKernel {
  std::vector<double> re;
  std::vector<double> im;
};

BinKernel make_kernel(const CqtConfig& cfg, std::size_t k) {
  const std::size_t n = cfg.window_length(k);
  const auto w = hann_window(n);
  const double q = cfg.q();
  BinKernel kern{std::vector<double>(n), std::vector<double>(n)};
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double phase = -kTwoPi * q * static_cast<double>(i) / static_cast<double>(n);
    kern.re[i] = inv * w[i] * std::cos(phase);
    kern.im[i] = inv * w[i] * std::sin(phase);
  }
  return kern;
}

struct Padding {
  std::size_t left = 0;
  std::size_t right = 0;
};

Padding padding_for(const CqtConfig& cfg) {
  Padding pad;
  for (std::size_t k = 0; k < cfg.n_bins; ++k) {
    const auto n = cfg.window_length(k);
    pad.left = std::max(pad.left, n / 2);
    pad.right = std::max(pad.right, n - n / 2);
  }
  return pad;
}

std::vector<double> reflect_pad(const std::vector<double>& x, const Padding& pad) {
  std::vector<double> out(pad.left + x.size() + pad.right);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = x[reflect_index(static_cast<std::ptrdiff_t>(i) -
                                 static_cast<std::ptrdiff_t>(pad.left),
                             x.size())];
  return out;
}

void check_clip(const AudioClip& clip, const CqtConfig& cfg) {
  cfg.validate();
  if (clip.samples.empty()) throw InsufficientAudioError("cqt of an empty clip");
  if (std::abs(clip.sample_rate - cfg.sample_rate) > 1e-9)
    throw ConfigError("clip sample rate " + std::to_string(clip.sample_rate) +
                      " differs from the configured " +
                      std::to_string(cfg.sample_rate));
}

}  // namespace

std::size_t CqtConfig::max_bins(double sample_rate, double f_min,
                                std::size_t bins_per_octave) {
  std::size_t n = 0;
  while (f_min * std::pow(2.0, static_cast<double>(n) /
                                    static_cast<double>(bins_per_octave)) <
         sample_rate / 2.0)
    ++n;
  return n;
}

CqtConfig CqtConfig::defaults(double sample_rate) {
  CqtConfig c;
  c.sample_rate = sample_rate;
  c.n_bins = max_bins(sample_rate, c.f_min, c.bins_per_octave);
  return c;
}

double CqtConfig::q() const {
  return 1.0 / (std::pow(2.0, 1.0 / static_cast<double>(bins_per_octave)) - 1.0);
}

double CqtConfig::center_frequency(std::size_t k) const {
  return f_min * std::pow(2.0, static_cast<double>(k) / static_cast<double>(bins_per_octave));
}

std::size_t CqtConfig::window_length(std::size_t k) const {
  return static_cast<std::size_t>(std::ceil(q() * sample_rate / center_frequency(k)));
}

std::size_t CqtConfig::frame_count(std::size_t n_samples) const {
  if (n_samples == 0) return 0;
  return (n_samples - 1) / hop + 1;
}

void CqtConfig::validate() const {
  if (!(sample_rate > 0.0)) throw ConfigError("cqt.sample_rate must be positive");
  if (!(f_min > 0.0)) throw ConfigError("cqt.f_min must be positive");
  if (bins_per_octave == 0) throw ConfigError("cqt.bins_per_octave must be positive");
  if (n_bins == 0) throw ConfigError("cqt.n_bins must be positive");
  if (hop == 0) throw ConfigError("cqt.hop must be positive");
  if (!(center_frequency(n_bins - 1) < sample_rate / 2.0))
    throw ConfigError("cqt: top center frequency " +
                      std::to_string(center_frequency(n_bins - 1)) +
                      " Hz is not below Nyquist");
}

void CqtConfig::to_kv(KeyValues& kv, const std::string& prefix) const {
  kv.set(prefix + "sample_rate", format_double(sample_rate));
  kv.set(prefix + "f_min", format_double(f_min));
  kv.set(prefix + "bins_per_octave", std::to_string(bins_per_octave));
  kv.set(prefix + "n_bins", std::to_string(n_bins));
  kv.set(prefix + "hop", std::to_string(hop));
  kv.set(prefix + "window", "hann");
}

CqtConfig CqtConfig::from_kv(const KeyValues& kv, const std::string& prefix) {
  auto count = [&](const std::string& key) {
    const auto v = kv.get_int(prefix + key);
    if (v < 0) throw ConfigError(prefix + key + " must be non-negative");
    return static_cast<std::size_t>(v);
  };
  CqtConfig c;
  c.sample_rate = kv.get_double(prefix + "sample_rate");
  c.f_min = kv.get_double(prefix + "f_min");
  c.bins_per_octave = count("bins_per_octave");
  c.n_bins = count("n_bins");
  c.hop = count("hop");
  if (kv.get(prefix + "window") != "hann")
    throw ConfigError(prefix + "window: unsupported window '" + kv.get(prefix + "window") + "'");
  return c;
}

const char* phase_mode_name(PhaseMode mode) {
  switch (mode) {
    case PhaseMode::kFull: return "full";
    case PhaseMode::kZero: return "zero";
    case PhaseMode::kRandom: return "random";
  }
  return "?";
}

PhaseMode parse_phase_mode(const std::string& name) {
  if (name == "full") return PhaseMode::kFull;
  if (name == "zero") return PhaseMode::kZero;
  if (name == "random") return PhaseMode::kRandom;
  throw ConfigError("unknown phase mode '" + name + "'");
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

std::size_t reflect_index(std::ptrdiff_t i, std::size_t len) {
  const auto period = static_cast<std::ptrdiff_t>(2 * len);
  auto m = i % period;
  if (m < 0) m += period;
  const auto l = static_cast<std::ptrdiff_t>(len);
  return static_cast<std::size_t>(m < l ? m : period - 1 - m);
}

ComplexTensor stft(const AudioClip& clip, const std::vector<double>& window,
                   std::size_t hop) {
  std::vector<std::complex<double>> x(clip.samples.begin(), clip.samples.end());
  return stft(x, window, hop);
}

ComplexTensor stft(std::span<const std::complex<double>> signal,
                   const std::vector<double>& window, std::size_t hop) {
  const std::size_t n = window.size();
  if (n == 0 || hop == 0) throw ConfigError("stft needs a non-empty window and hop > 0");
  if (n > signal.size())
    throw InsufficientAudioError("stft window (" + std::to_string(n) +
                                 ") longer than signal (" +
                                 std::to_string(signal.size()) + ")");
  const std::size_t frames = (signal.size() - n) / hop + 1;
  std::vector<double> cos_t(n), sin_t(n);
  for (std::size_t i = 0; i < n; ++i) {
    cos_t[i] = std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n));
    sin_t[i] = -std::sin(kTwoPi * static_cast<double>(i) / static_cast<double>(n));
  }
  auto out = ComplexTensor::zeros({frames, n});
  auto re = out.real_mut();
  auto im = out.imag_mut();
  for (std::size_t t = 0; t < frames; ++t) {
    const auto* x = signal.data() + t * hop;
    for (std::size_t k = 0; k < n; ++k) {
      double ar = 0.0, ai = 0.0;
      std::size_t idx = 0;  // (k·i) mod n
      for (std::size_t i = 0; i < n; ++i) {
        const double vr = window[i] * x[i].real(), vi = window[i] * x[i].imag();
        ar += vr * cos_t[idx] - vi * sin_t[idx];
        ai += vr * sin_t[idx] + vi * cos_t[idx];
        idx += k;
        if (idx >= n) idx -= n;
      }
      re[t * n + k] = ar;
      im[t * n + k] = ai;
    }
  }
  return out;
}

ComplexSpectrogram cqt(const AudioClip& clip, const CqtConfig& config) {
  check_clip(clip, config);
  const auto pad = padding_for(config);
  const auto x = reflect_pad(clip.samples, pad);
  const std::size_t frames = config.frame_count(clip.samples.size());
  const std::size_t bins = config.n_bins;
  auto data = ComplexTensor::zeros({bins, frames});
  auto re = data.real_mut();
  auto im = data.imag_mut();
  for (std::size_t k = 0; k < bins; ++k) {
    const auto kern = make_kernel(config, k);
    const std::size_t n = kern.re.size();
    const std::size_t offset = pad.left - n / 2;
    for (std::size_t t = 0; t < frames; ++t) {
      const double* seg = x.data() + offset + t * config.hop;
      double ar = 0.0, ai = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        ar += kern.re[i] * seg[i];
        ai += kern.im[i] * seg[i];
      }
      re[k * frames + t] = ar;
      im[k * frames + t] = ai;
    }
  }
  data.check_finite("cqt");
  return {data, config, PhaseMode::kFull};
}

struct FastCqt::Plan {
  std::size_t n_samples = 0;
  std::size_t fft_len = 0;   // L, a multiple of hop
  std::size_t fold_len = 0;  // M = L / hop
  Padding pad;
  // Per-bin spectra Σ_n a[n] e^(+2πi f n/L) · e^(2πi f off_k/L), interleaved.
  std::vector<std::vector<std::complex<double>>> kernel_spectra;
  PlanHandle forward;   // real → half spectrum, length L
  PlanHandle inverse;   // complex backward, length M
};

FastCqt::FastCqt(CqtConfig config) : config_(std::move(config)) {
  config_.validate();
}

FastCqt::~FastCqt() = default;

const FastCqt::Plan& FastCqt::plan_for(std::size_t n_samples) const {
  std::lock_guard lock(mutex_);
  if (auto it = plans_.find(n_samples); it != plans_.end()) return *it->second;

  auto plan = std::make_unique<Plan>();
  plan->n_samples = n_samples;
  plan->pad = padding_for(config_);
  const std::size_t padded = plan->pad.left + n_samples + plan->pad.right;
  std::size_t fold = 1;
  while (fold * config_.hop < padded) fold *= 2;
  plan->fold_len = fold;
  plan->fft_len = fold * config_.hop;
  const std::size_t L = plan->fft_len;

  auto in = fftw_buffer<fftw_complex>(L);
  auto out = fftw_buffer<fftw_complex>(L);
  PlanHandle kernel_plan;
  {
    std::lock_guard plock(planner_mutex());
    kernel_plan.reset(fftw_plan_dft_1d(static_cast<int>(L), in.get(), out.get(),
                                       FFTW_BACKWARD, FFTW_ESTIMATE));
    auto real_in = fftw_buffer<double>(L);
    auto half_out = fftw_buffer<fftw_complex>(L / 2 + 1);
    plan->forward.reset(fftw_plan_dft_r2c_1d(static_cast<int>(L), real_in.get(),
                                             half_out.get(), FFTW_ESTIMATE));
    auto m_in = fftw_buffer<fftw_complex>(fold);
    auto m_out = fftw_buffer<fftw_complex>(fold);
    plan->inverse.reset(fftw_plan_dft_1d(static_cast<int>(fold), m_in.get(), m_out.get(),
                                         FFTW_BACKWARD, FFTW_ESTIMATE));
  }

  plan->kernel_spectra.resize(config_.n_bins);
  for (std::size_t k = 0; k < config_.n_bins; ++k) {
    const auto kern = make_kernel(config_, k);
    const std::size_t n = kern.re.size();
    std::fill(reinterpret_cast<double*>(in.get()),
              reinterpret_cast<double*>(in.get()) + 2 * L, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      in[i][0] = kern.re[i];
      in[i][1] = kern.im[i];
    }
    fftw_execute_dft(kernel_plan.get(), in.get(), out.get());
    const std::size_t offset = plan->pad.left - n / 2;
    auto& spec = plan->kernel_spectra[k];
    spec.resize(L);
    for (std::size_t f = 0; f < L; ++f) {
      const double ang = kTwoPi * static_cast<double>((f * offset) % L) / static_cast<double>(L);
      spec[f] = std::complex<double>(out[f][0], out[f][1]) *
                std::complex<double>(std::cos(ang), std::sin(ang));
    }
  }
  const auto& ref = *plan;
  plans_.emplace(n_samples, std::move(plan));
  return ref;
}

ComplexSpectrogram FastCqt::operator()(const AudioClip& clip) const {
  check_clip(clip, config_);
  const auto& plan = plan_for(clip.samples.size());
  const std::size_t L = plan.fft_len, M = plan.fold_len;
  const auto padded = reflect_pad(clip.samples, plan.pad);

  auto real_in = fftw_buffer<double>(L);
  std::fill(real_in.get(), real_in.get() + L, 0.0);
  std::copy(padded.begin(), padded.end(), real_in.get());
  auto half = fftw_buffer<fftw_complex>(L / 2 + 1);
  fftw_execute_dft_r2c(plan.forward.get(), real_in.get(), half.get());
  std::vector<std::complex<double>> spectrum(L);
  for (std::size_t f = 0; f <= L / 2; ++f) spectrum[f] = {half[f][0], half[f][1]};
  for (std::size_t f = L / 2 + 1; f < L; ++f) spectrum[f] = std::conj(spectrum[L - f]);

  const std::size_t frames = config_.frame_count(clip.samples.size());
  const std::size_t bins = config_.n_bins;
  auto data = ComplexTensor::zeros({bins, frames});
  auto re = data.real_mut();
  auto im = data.imag_mut();
  auto folded = fftw_buffer<fftw_complex>(M);
  auto result = fftw_buffer<fftw_complex>(M);
  const double inv_l = 1.0 / static_cast<double>(L);
  for (std::size_t k = 0; k < bins; ++k) {
    const auto& ks = plan.kernel_spectra[k];
    std::fill(reinterpret_cast<double*>(folded.get()),
              reinterpret_cast<double*>(folded.get()) + 2 * M, 0.0);
    for (std::size_t base = 0; base < L; base += M) {
      for (std::size_t m = 0; m < M; ++m) {
        const auto& a = spectrum[base + m];
        const auto& b = ks[base + m];
        folded[m][0] += a.real() * b.real() - a.imag() * b.imag();
        folded[m][1] += a.real() * b.imag() + a.imag() * b.real();
      }
    }
    fftw_execute_dft(plan.inverse.get(), folded.get(), result.get());
    for (std::size_t t = 0; t < frames; ++t) {
      re[k * frames + t] = result[t][0] * inv_l;
      im[k * frames + t] = result[t][1] * inv_l;
    }
  }
  data.check_finite("fast cqt");
  return {data, config_, PhaseMode::kFull};
}

}  // namespace ccqt::dsp
