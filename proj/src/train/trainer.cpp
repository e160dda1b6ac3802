#include "ccqt/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "ccqt/ctensor/adam.hpp"
#include "ccqt/ctensor/autograd.hpp"
#include "ccqt/dsp/features.hpp"
#include "ccqt/dsp/pipeline.hpp"
#include "ccqt/errors.hpp"
#include "ccqt/eval/eval.hpp"

namespace ccqt::train {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0 && std::isfinite(learning_rate)))
    throw ConfigError("train.learning_rate must be positive");
  if (!(weight_decay >= 0.0 && std::isfinite(weight_decay)))
    throw ConfigError("train.weight_decay must be non-negative");
  if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
  if (max_epochs < 1) throw ConfigError("train.max_epochs must be at least 1");
  if (patience < 1) throw ConfigError("train.patience must be at least 1");
  if (!(min_delta >= 0.0 && std::isfinite(min_delta)))
    throw ConfigError("train.min_delta must be non-negative");
  if (!(clip_duration_s > 0.0 && std::isfinite(clip_duration_s)))
    throw ConfigError("train.clip_duration must be positive");
}

void TrainConfig::to_kv(KeyValues& kv, const std::string& prefix) const {
  kv.set(prefix + "learning_rate", format_double(learning_rate));
  kv.set(prefix + "weight_decay", format_double(weight_decay));
  kv.set(prefix + "batch_size", std::to_string(batch_size));
  kv.set(prefix + "max_epochs", std::to_string(max_epochs));
  kv.set(prefix + "patience", std::to_string(patience));
  kv.set(prefix + "min_delta", format_double(min_delta));
  kv.set(prefix + "clip_duration", format_double(clip_duration_s));
  kv.set(prefix + "phase_mode", dsp::phase_mode_name(phase_mode));
  kv.set(prefix + "seed", std::to_string(seed));
}

namespace {

std::size_t non_negative(const KeyValues& kv, const std::string& key) {
  const auto v = kv.get_int(key);
  if (v < 0) throw ConfigError(key + " must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

TrainConfig TrainConfig::from_kv(const KeyValues& kv, const std::string& prefix) {
  TrainConfig c;
  c.learning_rate = kv.get_double(prefix + "learning_rate");
  c.weight_decay = kv.get_double(prefix + "weight_decay");
  c.batch_size = non_negative(kv, prefix + "batch_size");
  c.max_epochs = non_negative(kv, prefix + "max_epochs");
  c.patience = non_negative(kv, prefix + "patience");
  c.min_delta = kv.get_double(prefix + "min_delta");
  c.clip_duration_s = kv.get_double(prefix + "clip_duration");
  try {
    c.phase_mode = dsp::parse_phase_mode(kv.get(prefix + "phase_mode"));
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + "phase_mode: " + e.what());
  }
  c.seed = non_negative(kv, prefix + "seed");
  return c;
}

EarlyStopper::EarlyStopper(std::size_t patience, double min_delta)
    : patience_(patience), min_delta_(min_delta) {
  if (patience < 1) throw ConfigError("early-stopping patience must be at least 1");
}

bool EarlyStopper::update(double value) {
  if (value < reference_ - min_delta_) {
    reference_ = value;
    stale_ = 0;
    return false;
  }
  return ++stale_ >= patience_;
}

namespace {

// Seed-path tags for the independent random streams of a run.
enum Stream : std::uint64_t {
  kShuffle = 10,
  kItem = 11,
  kDropout = 12,
  kFgsmCoin = 13,
  kFgsmDropout = 14,
  kAdversarialDropout = 15,
  kValidationPhase = 16,
};

ComplexTensor stack(const std::vector<ComplexTensor>& specs) {
  const std::size_t f = specs.front().dim(0), t = specs.front().dim(1);
  std::vector<double> re, im;
  re.reserve(specs.size() * f * t);
  im.reserve(specs.size() * f * t);
  for (const auto& s : specs) {
    re.insert(re.end(), s.real().begin(), s.real().end());
    im.insert(im.end(), s.imag().begin(), s.imag().end());
  }
  return ComplexTensor::from_planes({specs.size(), 1, f, t}, std::move(re), std::move(im));
}

struct ValidationResult {
  double loss = 0.0;
  double eer = 0.0;
};

ValidationResult validate_model(nn::Model& model, const std::vector<ComplexTensor>& specs,
                                 const std::vector<LabeledClip>& clips, std::size_t batch_size) {
  NoGradGuard no_grad;
  ValidationResult r;
  eval::ScoreSet scores;
  for (std::size_t start = 0; start < specs.size(); start += batch_size) {
    const std::size_t b = std::min(batch_size, specs.size() - start);
    std::vector<ComplexTensor> chunk(specs.begin() + static_cast<std::ptrdiff_t>(start),
                                     specs.begin() + static_cast<std::ptrdiff_t>(start + b));
    std::vector<int> labels;
    for (std::size_t i = start; i < start + b; ++i) labels.push_back(clips[i].label);
    const auto out = model.forward(stack(chunk), nn::Mode::kEval);
    const double loss = nn::cross_entropy(out.logits, labels).real()[0];
    if (!std::isfinite(loss)) throw NonFiniteError("validation loss is not finite");
    r.loss += loss * static_cast<double>(b);
    for (std::size_t i = 0; i < b; ++i)
      scores.push_back({clips[start + i].id, clips[start + i].label, out.scores.real()[i * 2 + 1]});
  }
  r.loss /= static_cast<double>(specs.size());
  const bool both = std::any_of(clips.begin(), clips.end(), [](auto& c) { return c.label == 0; }) &&
                    std::any_of(clips.begin(), clips.end(), [](auto& c) { return c.label == 1; });
  r.eer = both ? eval::compute_eer(scores).eer : std::nan("");
  return r;
}

std::string describe(std::size_t epoch, std::size_t batch, bool adversarial) {
  return "at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
         (adversarial ? " (adversarial)" : "");
}

}  // namespace

TrainResult train_loop(nn::Model model, const std::vector<LabeledClip>& train_set,
                       const std::vector<LabeledClip>& val_set, const TrainConfig& cfg,
                       const AugmentationConfig& aug, const dsp::TrimConfig& trim,
                       const ProgressFn& progress) {
  cfg.validate();
  aug.validate();
  if (train_set.empty() || val_set.empty())
    throw ConfigError("training and validation sets must be non-empty");
  auto log = [&](const std::string& msg) {
    if (progress) progress(msg);
  };

  const dsp::ClipPipeline pipeline(model.features(), trim, cfg.clip_duration_s);
  std::vector<dsp::AudioClip> trimmed;
  trimmed.reserve(train_set.size());
  for (const auto& c : train_set) {
    try {
      trimmed.push_back(pipeline.trim(c.clip));
    } catch (const InsufficientAudioError& e) {
      throw InsufficientAudioError("training clip '" + c.id + "': " + e.what());
    }
  }
  std::vector<ComplexTensor> val_specs;
  val_specs.reserve(val_set.size());
  for (std::size_t i = 0; i < val_set.size(); ++i) {
    try {
      auto spec = pipeline.transform(pipeline.eval_window(val_set[i].clip));
      auto rng = make_rng(cfg.seed, {kValidationPhase, i});
      val_specs.push_back(dsp::phase_ablate(spec, cfg.phase_mode, rng).data);
    } catch (const InsufficientAudioError& e) {
      throw InsufficientAudioError("validation clip '" + val_set[i].id + "': " + e.what());
    }
  }

  AdamState adam;
  adam.hyper.learning_rate = cfg.learning_rate;
  adam.hyper.weight_decay = cfg.weight_decay;
  std::vector<ComplexTensor> params;
  for (auto& p : model.parameters()) params.push_back(p.tensor);

  auto diverged = [&](const std::string& where, const std::string& detail) {
    return NonFiniteError("training diverged " + where + ": " + detail + " (log_compress alpha " +
                          format_double(model.log_compress().alpha_value()) + ", c " +
                          format_double(model.log_compress().c_value()) + ")");
  };
  auto step = [&](const ComplexTensor& batch, const std::vector<int>& labels, Rng& dropout,
                  const std::string& where) {
    try {
      auto out = model.forward(batch, nn::Mode::kTrain, &dropout);
      auto loss = nn::cross_entropy(out.logits, labels);
      const double value = loss.real()[0];
      if (!std::isfinite(value)) throw NonFiniteError("loss is " + format_double(value));
      backward(loss);
      adam_step(params, adam);
      model.clamp_constrained();
      return value;
    } catch (const NonFiniteError& e) {
      throw diverged(where, e.what());
    }
  };

  TrainResult result{model.clone(), {}, 0, false};
  double best_val = std::numeric_limits<double>::infinity();
  EarlyStopper stopper(cfg.patience, cfg.min_delta);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = train_set.size();

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto shuffle_rng = make_rng(cfg.seed, {kShuffle, epoch});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t n_adversarial = 0;
    for (std::size_t start = 0, bi = 0; start < n; start += cfg.batch_size, ++bi) {
      const std::size_t b = std::min(cfg.batch_size, n - start);
      std::vector<ComplexTensor> specs;
      std::vector<int> labels;
      for (std::size_t j = start; j < start + b; ++j) {
        const std::size_t idx = order[j];
        auto rng = make_rng(cfg.seed, {kItem, epoch, idx});
        auto window = augment(pipeline.random_crop(trimmed[idx], rng), aug, rng);
        auto spec = dsp::phase_ablate(pipeline.transform(window), cfg.phase_mode, rng).data;
        augment_spectrogram(spec, aug, rng);
        specs.push_back(std::move(spec));
        labels.push_back(train_set[idx].label);
      }
      const auto batch = stack(specs);
      specs.clear();

      auto dropout = make_rng(cfg.seed, {kDropout, epoch, bi});
      const auto where = describe(epoch, bi + 1, false);
      loss_sum += step(batch, labels, dropout, where) * static_cast<double>(b);

      auto coin = make_rng(cfg.seed, {kFgsmCoin, epoch, bi});
      if (unit(coin) < aug.p_fgsm) {
        auto grad_dropout = make_rng(cfg.seed, {kFgsmDropout, epoch, bi});
        ComplexTensor adversarial;
        try {
          adversarial = fgsm_example(batch, labels, model, aug.fgsm_fraction, grad_dropout);
        } catch (const NonFiniteError& e) {
          throw diverged(describe(epoch, bi + 1, true), e.what());
        }
        auto adv_dropout = make_rng(cfg.seed, {kAdversarialDropout, epoch, bi});
        step(adversarial, labels, adv_dropout, describe(epoch, bi + 1, true));
        ++n_adversarial;
      }
    }

    ValidationResult val;
    try {
      val = validate_model(model, val_specs, val_set, cfg.batch_size);
    } catch (const NonFiniteError& e) {
      throw diverged("in validation after epoch " + std::to_string(epoch), e.what());
    }
    EpochRecord rec{epoch, loss_sum / static_cast<double>(n), val.loss, val.eer};
    result.history.push_back(rec);
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "epoch %zu: train_loss %.5f val_loss %.5f val_eer %.4f (%zu adversarial batches)",
                  epoch, rec.train_loss, rec.val_loss, rec.val_eer, n_adversarial);
    log(buf);

    if (val.loss < best_val) {
      best_val = val.loss;
      result.model = model.clone();
      result.best_epoch = epoch;
    }
    if (stopper.update(val.loss)) {
      result.stopped_early = epoch < cfg.max_epochs;
      if (result.stopped_early)
        log("early stop: no validation improvement for " + std::to_string(cfg.patience) +
            " epochs");
      break;
    }
  }
  return result;
}

void write_history_csv(const std::vector<EpochRecord>& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write history '" + path + "'");
  out << "epoch,train_loss,val_loss,val_eer\n";
  char buf[128];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", r.epoch, r.train_loss, r.val_loss,
                  r.val_eer);
    out << buf;
  }
  if (!out) throw FormatError("write failed for '" + path + "'");
}

}  // namespace ccqt::train
