#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccqt/dsp/audio.hpp"
#include "ccqt/kv.hpp"

namespace ccqt::train {

inline constexpr int kBonaFide = 0;
inline constexpr int kSpoof = 1;

struct LabeledClip {
  std::string id;
  dsp::AudioClip clip;
  int label = kBonaFide;
  // Clips sharing a group (a synthetic pair) always land in the same split.
  std::size_t group = 0;
};

// Harmonic stand-in for a bona fide / spoof corpus. Each pair draws one
// fundamental and one amplitude profile; the bona fide clip sums cosines with
// zero phase, its spoof twin uses independently uniform phases.
struct SyntheticDatasetSpec {
  std::size_t n_pairs = 400;  // clips per class
  double duration_s = 2.0;
  double sample_rate = 16000.0;
  std::size_t n_harmonics = 20;
  double f0_min = 80.0;
  double f0_max = 250.0;
  double rolloff = 1.0;  // a_h ∝ u_h / h^rolloff, u_h ~ U[0.5, 1]
  double peak = 0.9;
  std::uint64_t seed = 1;

  void validate() const;
  void to_kv(KeyValues& kv, const std::string& prefix = "synth.") const;
  static SyntheticDatasetSpec from_kv(const KeyValues& kv, const std::string& prefix = "synth.");
};

struct SyntheticPair {
  double f0 = 0.0;
  std::vector<double> amplitudes;      // a_1 .. a_H before normalization
  std::vector<double> spoof_phases;
  LabeledClip bona_fide;
  LabeledClip spoof;
};

// Pair `index` of the dataset; depends only on (spec, index).
SyntheticPair synth_pair(const SyntheticDatasetSpec& spec, std::size_t index);

// 2·n_pairs clips ordered pair by pair (bona fide first).
std::vector<LabeledClip> synth_dataset(const SyntheticDatasetSpec& spec);

struct ManifestEntry {
  std::string path;  // relative to the manifest's corpus root
  int label = kBonaFide;
};

// One `<relative path>,<label 0|1>` per line; blank lines and `#` comments
// are skipped.
std::vector<ManifestEntry> read_manifest(const std::string& path);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path);

// Loads every manifest entry relative to `root`. Clip ids are the relative
// paths; each clip is its own group.
std::vector<LabeledClip> load_corpus(const std::string& root,
                                     const std::vector<ManifestEntry>& entries);

struct Split {
  std::vector<LabeledClip> train;
  std::vector<LabeledClip> held_out;
};

// Deterministic split by group: round(held_out_fraction · groups) groups go
// to held_out, chosen by a seeded shuffle; input order is kept within each
// side.
Split split_by_group(const std::vector<LabeledClip>& clips, double held_out_fraction,
                     std::uint64_t seed);

// Writes `<dir>/clips/*.wav`, `<dir>/manifest.csv` (all clips) and the 80/20
// `<dir>/train.csv` / `<dir>/val.csv` split. Returns the split.
Split write_synthetic_corpus(const SyntheticDatasetSpec& spec, const std::string& dir,
                             double held_out_fraction = 0.2);

}  // namespace ccqt::train
