#pragma once

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "ccqt/ctensor/tensor.hpp"
#include "ccqt/dsp/audio.hpp"
#include "ccqt/kv.hpp"
#include "ccqt/rng.hpp"

namespace ccqt::dsp {

enum class WindowKind { kHann };

// Geometric filter bank: f_k = f_min · 2^(k / bins_per_octave), constant
// quality factor Q = 1 / (2^(1/bins_per_octave) − 1), per-bin window length
// N_k = ceil(Q · rate / f_k).
struct CqtConfig {
  double sample_rate = 16000.0;
  double f_min = 32.7;
  std::size_t bins_per_octave = 12;
  std::size_t n_bins = 96;
  std::size_t hop = 32;
  WindowKind window = WindowKind::kHann;

  // Largest bin count keeping every center frequency below Nyquist.
  static std::size_t max_bins(double sample_rate, double f_min,
                              std::size_t bins_per_octave);
  static CqtConfig defaults(double sample_rate = 16000.0);

  double q() const;
  double center_frequency(std::size_t k) const;
  std::size_t window_length(std::size_t k) const;
  std::size_t frame_count(std::size_t n_samples) const;
  void validate() const;

  void to_kv(KeyValues& kv, const std::string& prefix = "cqt.") const;
  static CqtConfig from_kv(const KeyValues& kv, const std::string& prefix = "cqt.");
};

enum class PhaseMode { kFull, kZero, kRandom };
const char* phase_mode_name(PhaseMode mode);
PhaseMode parse_phase_mode(const std::string& name);

// Z_Q[t, k] stored as a (F, T) tensor, frequency-major.
struct ComplexSpectrogram {
  ComplexTensor data;
  CqtConfig config;
  PhaseMode phase_mode = PhaseMode::kFull;

  std::size_t bins() const { return data.dim(0); }
  std::size_t frames() const { return data.dim(1); }
};

// Periodic Hann window w[n] = 0.5 − 0.5 cos(2πn/N).
std::vector<double> hann_window(std::size_t n);

// Symmetric reflection of an out-of-range index into [0, len).
std::size_t reflect_index(std::ptrdiff_t i, std::size_t len);

// Z[t, k] = Σ_n W[n] · X[n + t·hop] · e^(−2πikn/N), frames without padding.
// Shape (T, N). Direct evaluation; used as a reference transform.
ComplexTensor stft(const AudioClip& clip, const std::vector<double>& window,
                   std::size_t hop);
ComplexTensor stft(std::span<const std::complex<double>> signal,
                   const std::vector<double>& window, std::size_t hop);

// Direct per-bin evaluation of
//   Z_Q[t, k] = (1/N_k) Σ_n W_k[n] · X[n + t·hop − ⌊N_k/2⌋] · e^(−2πiQn/N_k)
// with reflection at the clip edges, so frame t is centered on t·hop.
ComplexSpectrogram cqt(const AudioClip& clip, const CqtConfig& config);

// FFT-based evaluation of the same transform. Each bin's frame outputs are
// read from one circular cross-correlation, folded to the hop grid so only
// an (L/hop)-point inverse transform is needed per bin. Kernel spectra are
// cached per padded length. Agrees with cqt() to ~1e-12.
class FastCqt {
 public:
  explicit FastCqt(CqtConfig config);
  ~FastCqt();
  FastCqt(const FastCqt&) = delete;
  FastCqt& operator=(const FastCqt&) = delete;

  ComplexSpectrogram operator()(const AudioClip& clip) const;
  const CqtConfig& config() const { return config_; }

 private:
  struct Plan;
  const Plan& plan_for(std::size_t n_samples) const;

  CqtConfig config_;
  mutable std::mutex mutex_;
  mutable std::map<std::size_t, std::unique_ptr<Plan>> plans_;
};

}  // namespace ccqt::dsp
