#include "ccqt/train/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "ccqt/dsp/audio.hpp"
#include "ccqt/errors.hpp"
#include "ccqt/rng.hpp"

namespace ccqt::train {

namespace fs = std::filesystem;

void SyntheticDatasetSpec::validate() const {
  if (n_pairs == 0) throw ConfigError("synth.n_pairs must be positive");
  if (!(duration_s > 0.0)) throw ConfigError("synth.duration must be positive");
  if (!(sample_rate > 0.0)) throw ConfigError("synth.sample_rate must be positive");
  if (n_harmonics == 0) throw ConfigError("synth.n_harmonics must be positive");
  if (!(f0_min > 0.0 && f0_min <= f0_max))
    throw ConfigError("synth.f0_min must be positive and not above synth.f0_max");
  if (static_cast<double>(n_harmonics) * f0_max >= sample_rate / 2.0)
    throw ConfigError("synth: harmonic " + std::to_string(n_harmonics) + " of f0 " +
                      format_double(f0_max) + " Hz reaches Nyquist (" +
                      format_double(sample_rate / 2.0) + " Hz)");
  if (!(peak > 0.0 && peak <= 1.0)) throw ConfigError("synth.peak must lie in (0, 1]");
  if (!std::isfinite(rolloff)) throw ConfigError("synth.rolloff must be finite");
}

void SyntheticDatasetSpec::to_kv(KeyValues& kv, const std::string& prefix) const {
  kv.set(prefix + "n_pairs", std::to_string(n_pairs));
  kv.set(prefix + "duration", format_double(duration_s));
  kv.set(prefix + "sample_rate", format_double(sample_rate));
  kv.set(prefix + "n_harmonics", std::to_string(n_harmonics));
  kv.set(prefix + "f0_min", format_double(f0_min));
  kv.set(prefix + "f0_max", format_double(f0_max));
  kv.set(prefix + "rolloff", format_double(rolloff));
  kv.set(prefix + "peak", format_double(peak));
  kv.set(prefix + "seed", std::to_string(seed));
}

namespace {

std::size_t count(const KeyValues& kv, const std::string& key) {
  const auto v = kv.get_int(key);
  if (v < 0) throw ConfigError(key + " must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

SyntheticDatasetSpec SyntheticDatasetSpec::from_kv(const KeyValues& kv, const std::string& prefix) {
  SyntheticDatasetSpec s;
  s.n_pairs = count(kv, prefix + "n_pairs");
  s.duration_s = kv.get_double(prefix + "duration");
  s.sample_rate = kv.get_double(prefix + "sample_rate");
  s.n_harmonics = count(kv, prefix + "n_harmonics");
  s.f0_min = kv.get_double(prefix + "f0_min");
  s.f0_max = kv.get_double(prefix + "f0_max");
  s.rolloff = kv.get_double(prefix + "rolloff");
  s.peak = kv.get_double(prefix + "peak");
  s.seed = count(kv, prefix + "seed");
  return s;
}

namespace {

dsp::AudioClip harmonic_clip(const SyntheticDatasetSpec& spec, double f0,
                             const std::vector<double>& amps, const std::vector<double>& phases) {
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * spec.sample_rate));
  dsp::AudioClip clip;
  clip.sample_rate = spec.sample_rate;
  clip.samples.assign(n, 0.0);
  const double w = 2.0 * std::numbers::pi * f0 / spec.sample_rate;
  for (std::size_t h = 0; h < amps.size(); ++h) {
    const double wh = w * static_cast<double>(h + 1);
    for (std::size_t i = 0; i < n; ++i)
      clip.samples[i] += amps[h] * std::cos(wh * static_cast<double>(i) + phases[h]);
  }
  double top = 0.0;
  for (double v : clip.samples) top = std::max(top, std::abs(v));
  if (top > 0.0)
    for (double& v : clip.samples) v *= spec.peak / top;
  return clip;
}

std::string pair_id(std::size_t pair, int label) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "p%05zu_%s", pair, label == kBonaFide ? "bona" : "spoof");
  return buf;
}

}  // namespace

SyntheticPair synth_pair(const SyntheticDatasetSpec& spec, std::size_t index) {
  spec.validate();
  auto rng = make_rng(spec.seed, {index});
  std::uniform_real_distribution<double> f0_dist(spec.f0_min, spec.f0_max);
  std::uniform_real_distribution<double> jitter(0.5, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  SyntheticPair pair;
  pair.f0 = f0_dist(rng);
  pair.amplitudes.resize(spec.n_harmonics);
  pair.spoof_phases.resize(spec.n_harmonics);
  for (std::size_t h = 0; h < spec.n_harmonics; ++h)
    pair.amplitudes[h] = jitter(rng) / std::pow(static_cast<double>(h + 1), spec.rolloff);
  for (auto& ph : pair.spoof_phases) ph = angle(rng);
  const std::vector<double> coherent(spec.n_harmonics, 0.0);
  pair.bona_fide = {pair_id(index, kBonaFide),
                    harmonic_clip(spec, pair.f0, pair.amplitudes, coherent), kBonaFide, index};
  pair.spoof = {pair_id(index, kSpoof),
                harmonic_clip(spec, pair.f0, pair.amplitudes, pair.spoof_phases), kSpoof, index};
  return pair;
}

std::vector<LabeledClip> synth_dataset(const SyntheticDatasetSpec& spec) {
  spec.validate();
  std::vector<LabeledClip> out;
  out.reserve(2 * spec.n_pairs);
  for (std::size_t p = 0; p < spec.n_pairs; ++p) {
    auto pair = synth_pair(spec, p);
    out.push_back(std::move(pair.bona_fide));
    out.push_back(std::move(pair.spoof));
  }
  return out;
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest '" + path + "'");
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto comma = text.rfind(',');
    const std::string where = path + ":" + std::to_string(lineno);
    if (comma == std::string_view::npos)
      throw MalformedFileError(where + ": expected '<relative path>,<label>'");
    const auto rel = trim(text.substr(0, comma));
    const auto label = trim(text.substr(comma + 1));
    if (rel.empty()) throw MalformedFileError(where + ": empty path");
    if (label != "0" && label != "1")
      throw MalformedFileError(where + ": label must be 0 or 1, got '" + std::string(label) + "'");
    entries.push_back({std::string(rel), label == "0" ? kBonaFide : kSpoof});
  }
  return entries;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write manifest '" + path + "'");
  for (const auto& e : entries) out << e.path << ',' << e.label << '\n';
  if (!out) throw FormatError("write failed for manifest '" + path + "'");
}

std::vector<LabeledClip> load_corpus(const std::string& root,
                                     const std::vector<ManifestEntry>& entries) {
  std::vector<LabeledClip> clips;
  clips.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto clip = dsp::load_wav((fs::path(root) / entries[i].path).string());
    clips.push_back({entries[i].path, std::move(clip), entries[i].label, i});
  }
  return clips;
}

Split split_by_group(const std::vector<LabeledClip>& clips, double held_out_fraction,
                     std::uint64_t seed) {
  if (!(held_out_fraction >= 0.0 && held_out_fraction <= 1.0))
    throw ConfigError("held-out fraction must lie in [0, 1]");
  std::vector<std::size_t> groups;
  for (const auto& c : clips) groups.push_back(c.group);
  std::sort(groups.begin(), groups.end());
  groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
  auto rng = make_rng(seed, {0x5eed});
  std::shuffle(groups.begin(), groups.end(), rng);
  const auto n_held = static_cast<std::size_t>(
      std::llround(held_out_fraction * static_cast<double>(groups.size())));
  std::vector<std::size_t> held(groups.begin(), groups.begin() + static_cast<std::ptrdiff_t>(n_held));
  std::sort(held.begin(), held.end());
  Split s;
  for (const auto& c : clips)
    (std::binary_search(held.begin(), held.end(), c.group) ? s.held_out : s.train).push_back(c);
  return s;
}

Split write_synthetic_corpus(const SyntheticDatasetSpec& spec, const std::string& dir,
                             double held_out_fraction) {
  const auto clips = synth_dataset(spec);
  fs::create_directories(fs::path(dir) / "clips");
  std::vector<ManifestEntry> all;
  for (const auto& c : clips) {
    const std::string rel = "clips/" + c.id + ".wav";
    dsp::save_wav(c.clip, (fs::path(dir) / rel).string());
    all.push_back({rel, c.label});
  }
  write_manifest(all, (fs::path(dir) / "manifest.csv").string());
  auto split = split_by_group(clips, held_out_fraction, spec.seed);
  auto entries = [](const std::vector<LabeledClip>& cs) {
    std::vector<ManifestEntry> e;
    for (const auto& c : cs) e.push_back({"clips/" + c.id + ".wav", c.label});
    return e;
  };
  write_manifest(entries(split.train), (fs::path(dir) / "train.csv").string());
  write_manifest(entries(split.held_out), (fs::path(dir) / "val.csv").string());
  return split;
}

}  // namespace ccqt::train
