#include "ccqt/cli/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace ccqt::cli {

namespace {

std::size_t count(const KeyValues& kv, const std::string& key) {
  const auto v = kv.get_int(key);
  if (v < 0) throw ConfigError(key + " must be non-negative");
  return static_cast<std::size_t>(v);
}

void validate_trim(const dsp::TrimConfig& t) {
  if (!(t.threshold_db > 0.0 && std::isfinite(t.threshold_db)))
    throw ConfigError("trim.threshold_db must be positive");
  if (!(t.frame_ms > 0.0 && std::isfinite(t.frame_ms)))
    throw ConfigError("trim.frame_ms must be positive");
  if (!(t.hop_ms > 0.0 && std::isfinite(t.hop_ms))) throw ConfigError("trim.hop_ms must be positive");
}

}  // namespace

void RunConfig::validate() const {
  cqt.validate();
  validate_trim(trim);
  model.validate();
  train.validate();
  augment.validate();
  synth.validate();
  if (!(data.held_out_fraction >= 0.0 && data.held_out_fraction < 1.0))
    throw ConfigError("data.held_out_fraction must lie in [0, 1)");
  if (eval.batch_size == 0) throw ConfigError("eval.batch_size must be positive");
  if (explain.n_samples == 0) throw ConfigError("explain.n_samples must be positive");
  if (!(explain.sigma >= 0.0 && std::isfinite(explain.sigma)))
    throw ConfigError("explain.sigma must be finite and non-negative");
  if (explain.target_class != 0 && explain.target_class != 1)
    throw ConfigError("explain.target_class must be 0 or 1");
  if (synth.sample_rate != cqt.sample_rate)
    throw ConfigError("synth.sample_rate (" + format_double(synth.sample_rate) +
                      ") must equal cqt.sample_rate (" + format_double(cqt.sample_rate) + ")");
  const auto window = static_cast<std::size_t>(train.clip_duration_s * cqt.sample_rate);
  if (cqt.frame_count(window) < 16)
    throw ConfigError("train.clip_duration gives fewer than 16 frames at cqt.hop " +
                      std::to_string(cqt.hop));
}

KeyValues RunConfig::to_kv() const {
  KeyValues kv;
  cqt.to_kv(kv);
  kv.set("trim.threshold_db", format_double(trim.threshold_db));
  kv.set("trim.frame_ms", format_double(trim.frame_ms));
  kv.set("trim.hop_ms", format_double(trim.hop_ms));
  model.to_kv(kv);
  train.to_kv(kv);
  augment.to_kv(kv);
  synth.to_kv(kv);
  kv.set("data.held_out_fraction", format_double(data.held_out_fraction));
  kv.set("data.split_seed", std::to_string(data.split_seed));
  kv.set("eval.batch_size", std::to_string(eval.batch_size));
  kv.set("eval.phase_mode", dsp::phase_mode_name(eval.phase_mode));
  kv.set("eval.seed", std::to_string(eval.seed));
  kv.set("explain.n_samples", std::to_string(explain.n_samples));
  kv.set("explain.sigma", format_double(explain.sigma));
  kv.set("explain.target_class", std::to_string(explain.target_class));
  kv.set("explain.max_clips", std::to_string(explain.max_clips));
  kv.set("explain.seed", std::to_string(explain.seed));
  kv.set("paths.corpus", paths.corpus);
  kv.set("paths.train_manifest", paths.train_manifest);
  kv.set("paths.val_manifest", paths.val_manifest);
  kv.set("paths.eval_manifest", paths.eval_manifest);
  kv.set("paths.checkpoint", paths.checkpoint);
  return kv;
}

RunConfig RunConfig::from_kv(const KeyValues& kv) {
  RunConfig c;
  c.cqt = dsp::CqtConfig::from_kv(kv);
  c.trim.threshold_db = kv.get_double("trim.threshold_db");
  c.trim.frame_ms = kv.get_double("trim.frame_ms");
  c.trim.hop_ms = kv.get_double("trim.hop_ms");
  c.model = nn::ModelConfig::from_kv(kv);
  c.train = train::TrainConfig::from_kv(kv);
  c.augment = train::AugmentationConfig::from_kv(kv);
  c.synth = train::SyntheticDatasetSpec::from_kv(kv);
  c.data.held_out_fraction = kv.get_double("data.held_out_fraction");
  c.data.split_seed = count(kv, "data.split_seed");
  c.eval.batch_size = count(kv, "eval.batch_size");
  try {
    c.eval.phase_mode = dsp::parse_phase_mode(kv.get("eval.phase_mode"));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("eval.phase_mode: ") + e.what());
  }
  c.eval.seed = count(kv, "eval.seed");
  c.explain.n_samples = count(kv, "explain.n_samples");
  c.explain.sigma = kv.get_double("explain.sigma");
  c.explain.target_class = static_cast<int>(kv.get_int("explain.target_class"));
  c.explain.max_clips = count(kv, "explain.max_clips");
  c.explain.seed = count(kv, "explain.seed");
  c.paths.corpus = kv.get("paths.corpus");
  c.paths.train_manifest = kv.get("paths.train_manifest");
  c.paths.val_manifest = kv.get("paths.val_manifest");
  c.paths.eval_manifest = kv.get("paths.eval_manifest");
  c.paths.checkpoint = kv.get("paths.checkpoint");
  return c;
}

namespace {

struct Assignment {
  std::string key, value;
};

// Splits `key = value`; returns false when there is no '=' or no key.
bool split_assignment(std::string_view line, Assignment& out) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) return false;
  out.key = std::string(trim(line.substr(0, eq)));
  out.value = std::string(trim(line.substr(eq + 1)));
  return !out.key.empty();
}

class Overlay {
 public:
  Overlay() : kv_(RunConfig{}.to_kv()) {}

  void apply(const Assignment& a, const std::string& origin) {
    if (!kv_.contains(a.key)) throw ConfigError(origin + ": unknown key '" + a.key + "'");
    kv_.set(a.key, a.value);
    origins_[a.key] = origin;
  }

  bool seen(const std::string& key) const { return origins_.count(key) > 0; }

  RunConfig build() const {
    try {
      auto cfg = RunConfig::from_kv(kv_);
      cfg.validate();
      return cfg;
    } catch (const ConfigError& e) {
      throw ConfigError(locate(e.what()));
    }
  }

 private:
  // Prefixes the message with the origin of every user-set key it names;
  // failing that, with the user-set keys of the section it is about.
  std::string locate(const std::string& message) const {
    std::vector<std::string> where;
    for (const auto& [key, origin] : origins_)
      if (message.find(key) != std::string::npos) where.push_back(origin);
    if (where.empty()) {
      for (const auto& [key, origin] : origins_) {
        const auto section = key.substr(0, key.find('.'));
        if (message.rfind(section + ".", 0) == 0 || message.rfind(section + ":", 0) == 0)
          where.push_back(origin);
      }
    }
    std::sort(where.begin(), where.end());
    where.erase(std::unique(where.begin(), where.end()), where.end());
    std::string prefix;
    for (const auto& w : where) prefix += w + ": ";
    return prefix + message;
  }

  KeyValues kv_;
  std::map<std::string, std::string> origins_;
};

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& source,
                            const std::vector<std::string>& overrides) {
  Overlay overlay;
  std::istringstream in(text);
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const std::string origin = source + ":" + std::to_string(lineno);
    Assignment a;
    if (!split_assignment(line, a))
      throw ConfigError(origin + ": expected 'section.key = value', got '" +
                        std::string(trim(line)) + "'");
    if (overlay.seen(a.key)) throw ConfigError(origin + ": duplicate key '" + a.key + "'");
    overlay.apply(a, origin);
  }
  for (const auto& o : overrides) {
    const std::string origin = "--set " + o;
    Assignment a;
    if (!split_assignment(o, a))
      throw ConfigError(origin + ": expected 'section.key=value'");
    overlay.apply(a, origin);
  }
  return overlay.build();
}

RunConfig parse_config(const std::string& path, const std::vector<std::string>& overrides) {
  if (path.empty()) return parse_config_text("", "<defaults>", overrides);
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str(), path, overrides);
}

}  // namespace ccqt::cli
