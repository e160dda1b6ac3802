#include "ccqt/cli/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ccqt/dsp/features.hpp"
#include "ccqt/dsp/pipeline.hpp"
#include "ccqt/eval/eval.hpp"
#include "ccqt/explain/saliency.hpp"
#include "ccqt/nn/checkpoint.hpp"

namespace ccqt::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

fs::path prepare_out(const std::string& out) {
  if (out.empty()) throw UsageError("an output directory is required (--out)");
  fs::create_directories(out);
  return fs::path(out);
}

std::string manifest_path(const RunConfig& cfg, const std::string& manifest) {
  const fs::path p(manifest);
  return p.is_absolute() ? p.string() : (fs::path(cfg.paths.corpus) / p).string();
}

std::vector<train::LabeledClip> load_manifest(const RunConfig& cfg, const std::string& command,
                                              const std::string& key,
                                              const std::string& manifest, const Logger& log) {
  if (cfg.paths.corpus.empty())
    throw UsageError(command + " needs a corpus directory (--corpus or paths.corpus)");
  if (manifest.empty()) throw UsageError(command + " needs a manifest (" + key + ")");
  const auto path = manifest_path(cfg, manifest);
  auto clips = train::load_corpus(cfg.paths.corpus, train::read_manifest(path));
  if (clips.empty()) throw UsageError(path + " lists no clips");
  if (log) log("loaded " + std::to_string(clips.size()) + " clips from " + path);
  return clips;
}

nn::Model load_model(const RunConfig& cfg, const std::string& command, const Logger& log) {
  if (cfg.paths.checkpoint.empty())
    throw UsageError(command + " needs a checkpoint (--checkpoint or paths.checkpoint)");
  auto model = nn::load_checkpoint(cfg.paths.checkpoint);
  if (log) log("loaded checkpoint " + cfg.paths.checkpoint);
  return model;
}

dsp::ClipPipeline scoring_pipeline(const RunConfig& cfg, const nn::Model& model) {
  return dsp::ClipPipeline(model.features(), cfg.trim, cfg.train.clip_duration_s);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

}  // namespace

std::string clip_stem(const std::string& id) {
  auto stem = fs::path(id).replace_extension().generic_string();
  for (auto& c : stem)
    if (c == '/' || c == '\\' || c == ':') c = '_';
  return stem;
}

std::string synth_data_command(const RunConfig& cfg, const std::string& out, const Logger& log) {
  const auto dir = prepare_out(out);
  if (log) log("synthesizing " + std::to_string(2 * cfg.synth.n_pairs) + " clips");
  const auto split = train::write_synthetic_corpus(cfg.synth, dir.string(),
                                                   cfg.data.held_out_fraction);
  return "synth-data: wrote " + std::to_string(split.train.size() + split.held_out.size()) +
         " clips (" + std::to_string(split.train.size()) + " train, " +
         std::to_string(split.held_out.size()) + " held out) to " + dir.string();
}

std::string features_command(const RunConfig& cfg, const std::string& out, const Logger& log) {
  const auto clips =
      load_manifest(cfg, "features", "paths.eval_manifest", cfg.paths.eval_manifest, log);
  const auto dir = prepare_out(out) / "features";
  fs::create_directories(dir);
  const dsp::ClipPipeline pipeline(cfg.cqt, cfg.trim, cfg.train.clip_duration_s);
  for (std::size_t i = 0; i < clips.size(); ++i) {
    auto rng = make_rng(cfg.eval.seed, {i});
    const auto spec = dsp::phase_ablate(pipeline.transform(pipeline.eval_window(clips[i].clip)),
                                        cfg.eval.phase_mode, rng);
    dsp::write_spectrogram_csv(spec, (dir / (clip_stem(clips[i].id) + ".csv")).string());
  }
  return "features: wrote " + std::to_string(clips.size()) + " " +
         dsp::phase_mode_name(cfg.eval.phase_mode) + "-phase spectrograms to " + dir.string();
}

std::string train_command(const RunConfig& cfg, const std::string& out, const Logger& log) {
  auto train_set =
      load_manifest(cfg, "train", "paths.train_manifest", cfg.paths.train_manifest, log);
  std::vector<train::LabeledClip> val_set;
  if (cfg.paths.val_manifest.empty()) {
    auto split = train::split_by_group(train_set, cfg.data.held_out_fraction, cfg.data.split_seed);
    train_set = std::move(split.train);
    val_set = std::move(split.held_out);
  } else {
    val_set = load_manifest(cfg, "train", "paths.val_manifest", cfg.paths.val_manifest, log);
  }
  const auto dir = prepare_out(out);
  if (log)
    log("training on " + std::to_string(train_set.size()) + " clips, validating on " +
        std::to_string(val_set.size()));
  auto result = train::train_loop(nn::Model(cfg.model, cfg.cqt, cfg.train.seed), train_set,
                                  val_set, cfg.train, cfg.augment, cfg.trim, log);
  nn::save_checkpoint(result.model, (dir / "checkpoint.ccqt").string());
  train::write_history_csv(result.history, (dir / "history.csv").string());
  write_text(dir / "config.txt", cfg.to_kv().to_text());
  const auto& best = result.history.at(result.best_epoch - 1);
  return "train: best epoch " + std::to_string(result.best_epoch) + " of " +
         std::to_string(result.history.size()) + fmt(" (val_loss %.5f", best.val_loss) +
         fmt(", val_eer %.4f)", best.val_eer) + (result.stopped_early ? ", stopped early" : "") +
         ", checkpoint " + (dir / "checkpoint.ccqt").string();
}

std::string eval_command(const RunConfig& cfg, const std::string& out, const Logger& log) {
  auto model = load_model(cfg, "eval", log);
  const auto clips = load_manifest(cfg, "eval", "paths.eval_manifest", cfg.paths.eval_manifest, log);
  const auto dir = prepare_out(out);
  const auto pipeline = scoring_pipeline(cfg, model);
  const auto scores = eval::score(model, clips, pipeline, cfg.eval.phase_mode, cfg.eval.seed,
                                  cfg.eval.batch_size);
  eval::EvalReport report;
  report.modes.push_back({cfg.eval.phase_mode, eval::compute_eer(scores)});
  eval::write_scores_csv(scores, (dir / "scores.csv").string());
  eval::write_report_csv(report, (dir / "report.csv").string());
  write_text(dir / "report.txt", eval::format_report(report, "eval"));
  const auto& r = report.modes.front().eer;
  return "eval: EER " + fmt("%.4f", r.eer) + fmt(" at threshold %.4f", r.threshold) + " on " +
         std::to_string(scores.size()) + " clips (" + dsp::phase_mode_name(cfg.eval.phase_mode) +
         " phase)";
}

std::string ablate_command(const RunConfig& cfg, const std::string& out, const Logger& log) {
  auto model = load_model(cfg, "ablate", log);
  const auto clips =
      load_manifest(cfg, "ablate", "paths.eval_manifest", cfg.paths.eval_manifest, log);
  const auto dir = prepare_out(out);
  const auto run = eval::ablation_suite(model, clips, scoring_pipeline(cfg, model), cfg.eval.seed);
  std::string summary = "ablate:";
  for (std::size_t m = 0; m < run.report.modes.size(); ++m) {
    const std::string name = dsp::phase_mode_name(run.report.modes[m].mode);
    eval::write_scores_csv(run.scores[m], (dir / ("ablation_scores_" + name + ".csv")).string());
    summary += (m ? ", " : " EER ") + name + fmt(" %.4f", run.report.modes[m].eer.eer);
  }
  eval::write_report_csv(run.report, (dir / "ablation_report.csv").string());
  write_text(dir / "ablation_report.txt", eval::format_report(run.report, "phase ablation"));
  return summary + " (" + run.report.ordering() + ")";
}

std::string explain_command(const RunConfig& cfg, const std::string& out, const Logger& log) {
  auto model = load_model(cfg, "explain", log);
  auto clips = load_manifest(cfg, "explain", "paths.eval_manifest", cfg.paths.eval_manifest, log);
  if (cfg.explain.max_clips > 0 && clips.size() > cfg.explain.max_clips)
    clips.resize(cfg.explain.max_clips);
  const auto dir = prepare_out(out) / "saliency";
  fs::create_directories(dir);
  const auto pipeline = scoring_pipeline(cfg, model);
  for (const auto& c : clips) {
    const auto spec = pipeline.transform(pipeline.eval_window(c.clip));
    auto map = explain::smoothgrad(model, spec, cfg.explain.target_class, cfg.explain.n_samples,
                                   cfg.explain.sigma, cfg.explain.seed);
    map.clip_id = c.id;
    const auto stem = dir / clip_stem(c.id);
    explain::export_pgm(map, stem.string() + ".pgm");
    explain::export_csv(map, stem.string() + ".csv");
    if (log) log("saliency map for " + c.id);
  }
  return "explain: wrote " + std::to_string(clips.size()) + " maps (target " +
         std::to_string(cfg.explain.target_class) + ", n " +
         std::to_string(cfg.explain.n_samples) + fmt(", sigma %g)", cfg.explain.sigma) + " to " +
         dir.string();
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"synth-data", "features", "train",
                                              "eval",       "ablate",   "explain"};
  return names;
}

std::string dispatch(const std::string& command, const RunConfig& cfg, const std::string& out,
                     const Logger& log) {
  if (command == "synth-data") return synth_data_command(cfg, out, log);
  if (command == "features") return features_command(cfg, out, log);
  if (command == "train") return train_command(cfg, out, log);
  if (command == "eval") return eval_command(cfg, out, log);
  if (command == "ablate") return ablate_command(cfg, out, log);
  if (command == "explain") return explain_command(cfg, out, log);
  throw UsageError("unknown command '" + command + "'");
}

}  // namespace ccqt::cli
