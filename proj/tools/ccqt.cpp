#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ccqt/cli/commands.hpp"
#include "ccqt/dsp/pipeline.hpp"

namespace {

struct Options {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  std::string corpus, train_manifest, val_manifest, manifest, checkpoint;
};

const char* describe(const std::string& command) {
  if (command == "synth-data") return "Write the synthetic phase-discriminative corpus";
  if (command == "features") return "Export CQT spectrograms of a manifest as CSV";
  if (command == "train") return "Train a model; writes checkpoint and history";
  if (command == "eval") return "Score a manifest with a checkpoint; writes scores and EER";
  if (command == "ablate") return "Score under full, zero and random phase";
  return "Write SmoothGrad saliency maps (PGM and CSV)";
}

void add_options(CLI::App* sub, Options& opt) {
  sub->add_option("-c,--config", opt.config, "Config file of `section.key = value` lines");
  sub->add_option("--set", opt.sets, "Override one key: section.key=value (repeatable)");
  sub->add_option("-o,--out", opt.out, "Output directory")->required();
  sub->add_option("--corpus", opt.corpus, "Corpus root (paths.corpus)");
  sub->add_option("--train-manifest", opt.train_manifest, "paths.train_manifest");
  sub->add_option("--val-manifest", opt.val_manifest, "paths.val_manifest");
  sub->add_option("--manifest", opt.manifest, "Manifest to score (paths.eval_manifest)");
  sub->add_option("--checkpoint", opt.checkpoint, "Checkpoint file (paths.checkpoint)");
}

std::vector<std::string> overrides(const CLI::App* sub, const Options& opt) {
  auto sets = opt.sets;
  auto path = [&](const char* flag, const char* key, const std::string& value) {
    if (sub->count(flag) > 0) sets.push_back(std::string(key) + "=" + value);
  };
  path("--corpus", "paths.corpus", opt.corpus);
  path("--train-manifest", "paths.train_manifest", opt.train_manifest);
  path("--val-manifest", "paths.val_manifest", opt.val_manifest);
  path("--manifest", "paths.eval_manifest", opt.manifest);
  path("--checkpoint", "paths.checkpoint", opt.checkpoint);
  return sets;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Complex-valued CQT anti-spoofing toolkit"};
  app.require_subcommand(1);
  Options opt;
  for (const auto& name : ccqt::cli::command_names())
    add_options(app.add_subcommand(name, describe(name)), opt);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  const auto* sub = app.get_subcommands().front();
  const auto start = std::chrono::steady_clock::now();
  const ccqt::cli::Logger log = [&](const std::string& msg) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::fprintf(stderr, "[%7.1fs] %s\n", s, msg.c_str());
  };

  try {
    const auto cfg = ccqt::cli::parse_config(opt.config, overrides(sub, opt));
    ccqt::dsp::tune_allocator();
    std::cout << ccqt::cli::dispatch(sub->get_name(), cfg, opt.out, log) << std::endl;
  } catch (const ccqt::cli::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ccqt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
