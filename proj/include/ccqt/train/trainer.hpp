#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "ccqt/dsp/cqt.hpp"
#include "ccqt/dsp/preprocess.hpp"
#include "ccqt/kv.hpp"
#include "ccqt/nn/model.hpp"
#include "ccqt/train/augment.hpp"
#include "ccqt/train/dataset.hpp"

namespace ccqt::train {

struct TrainConfig {
  double learning_rate = 5e-3;
  double weight_decay = 1e-6;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 25;
  std::size_t patience = 3;
  double min_delta = 5e-4;
  double clip_duration_s = 2.0;
  dsp::PhaseMode phase_mode = dsp::PhaseMode::kFull;
  std::uint64_t seed = 1;

  void validate() const;
  void to_kv(KeyValues& kv, const std::string& prefix = "train.") const;
  static TrainConfig from_kv(const KeyValues& kv, const std::string& prefix = "train.");
};

// Patience counter on a loss that should decrease. An epoch counts as an
// improvement when it beats the reference value by more than min_delta; the
// reference then moves to that value.
class EarlyStopper {
 public:
  EarlyStopper(std::size_t patience, double min_delta);
  // Returns true when training should stop after this epoch.
  bool update(double value);
  std::size_t epochs_without_improvement() const { return stale_; }

 private:
  std::size_t patience_;
  double min_delta_;
  double reference_ = std::numeric_limits<double>::infinity();
  std::size_t stale_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_eer = 0.0;
};

struct TrainResult {
  nn::Model model;  // lowest validation loss seen
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

using ProgressFn = std::function<void(const std::string&)>;

// Each epoch: seeded shuffle, then per batch trim/crop → augment → CQT →
// phase mode → frequency mask → forward → cross-entropy → backward → Adam.
// With probability p_fgsm the batch is followed by its FGSM counterpart as
// an extra optimizer step. train_loss is the mean loss of the clean batches.
// Validation uses center crops in eval mode. Throws NonFiniteError naming
// the epoch and batch when a loss diverges.
TrainResult train_loop(nn::Model model, const std::vector<LabeledClip>& train_set,
                       const std::vector<LabeledClip>& val_set, const TrainConfig& cfg,
                       const AugmentationConfig& aug, const dsp::TrimConfig& trim = {},
                       const ProgressFn& progress = {});

// Header `epoch,train_loss,val_loss,val_eer`, values at %.17g.
void write_history_csv(const std::vector<EpochRecord>& history, const std::string& path);

}  // namespace ccqt::train
