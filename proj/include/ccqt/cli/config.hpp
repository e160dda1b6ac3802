#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccqt/dsp/cqt.hpp"
#include "ccqt/dsp/preprocess.hpp"
#include "ccqt/errors.hpp"
#include "ccqt/kv.hpp"
#include "ccqt/nn/model.hpp"
#include "ccqt/train/augment.hpp"
#include "ccqt/train/dataset.hpp"
#include "ccqt/train/trainer.hpp"

namespace ccqt::cli {

// A command was invoked without something it needs (a path, a file).
class UsageError : public Error {
 public:
  using Error::Error;
};

struct DataConfig {
  // Used when no validation manifest is given: share of the training
  // manifest (and of the synthetic corpus) held out for validation.
  double held_out_fraction = 0.2;
  std::uint64_t split_seed = 1;
};

struct EvalConfig {
  std::size_t batch_size = 32;
  dsp::PhaseMode phase_mode = dsp::PhaseMode::kFull;
  std::uint64_t seed = 1;  // random-phase draws
};

struct ExplainConfig {
  std::size_t n_samples = 32;
  double sigma = 0.1;
  int target_class = 1;
  std::size_t max_clips = 4;  // first clips of the manifest; 0 = all
  std::uint64_t seed = 0;
};

// Manifests are resolved relative to the corpus root unless absolute. An
// empty validation manifest means "split the training manifest".
struct PathConfig {
  std::string corpus;
  std::string train_manifest = "train.csv";
  std::string val_manifest = "val.csv";
  std::string eval_manifest = "val.csv";
  std::string checkpoint;
};

// Every section of a run. The model is initialized from train.seed.
struct RunConfig {
  dsp::CqtConfig cqt = dsp::CqtConfig::defaults();
  dsp::TrimConfig trim;
  nn::ModelConfig model;
  train::TrainConfig train;
  train::AugmentationConfig augment;
  train::SyntheticDatasetSpec synth;
  DataConfig data;
  EvalConfig eval;
  ExplainConfig explain;
  PathConfig paths;

  // Section invariants plus the cross-section ones (matching sample rates,
  // enough CQT frames per training window).
  void validate() const;
  KeyValues to_kv() const;
  static RunConfig from_kv(const KeyValues& kv);
};

// Defaults, then `text` (named `source` in diagnostics), then each
// `section.key=value` override in order. Unknown keys, duplicates, type
// mismatches and invariant violations throw ConfigError naming the line or
// override responsible.
RunConfig parse_config_text(const std::string& text, const std::string& source,
                            const std::vector<std::string>& overrides = {});
// Same, reading `path`; an empty path means defaults plus overrides.
RunConfig parse_config(const std::string& path, const std::vector<std::string>& overrides = {});

}  // namespace ccqt::cli
