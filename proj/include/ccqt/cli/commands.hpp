#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ccqt/cli/config.hpp"

namespace ccqt::cli {

using Logger = std::function<void(const std::string&)>;

// Each command writes only below `out` (created if needed) and returns the
// one-line summary for standard output. Progress goes to `log`.
//
//   synth-data  clips/*.wav, manifest.csv, train.csv, val.csv
//   features    features/<clip>.csv        (t,k,re,im per clip)
//   train       checkpoint.ccqt, history.csv, config.txt
//   eval        scores.csv, report.csv, report.txt
//   ablate      ablation_scores_<mode>.csv, ablation_report.csv, ablation_report.txt
//   explain     saliency/<clip>.pgm, saliency/<clip>.csv
std::string synth_data_command(const RunConfig& cfg, const std::string& out, const Logger& log);
std::string features_command(const RunConfig& cfg, const std::string& out, const Logger& log);
std::string train_command(const RunConfig& cfg, const std::string& out, const Logger& log);
std::string eval_command(const RunConfig& cfg, const std::string& out, const Logger& log);
std::string ablate_command(const RunConfig& cfg, const std::string& out, const Logger& log);
std::string explain_command(const RunConfig& cfg, const std::string& out, const Logger& log);

const std::vector<std::string>& command_names();
// Throws UsageError for an unknown command.
std::string dispatch(const std::string& command, const RunConfig& cfg, const std::string& out,
                     const Logger& log);

// File-name-safe form of a clip id: path separators become '_' and the
// extension is dropped.
std::string clip_stem(const std::string& id);

}  // namespace ccqt::cli
