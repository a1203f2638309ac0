#pragma once

#include <filesystem>
#include <ostream>
#include <string>

#include "dtwlmnn/dtw.hpp"
#include "dtwlmnn/eval.hpp"
#include "run_config.hpp"

namespace dtwlmnn::app {

enum ExitCode : int { kOk = 0, kValidation = 2, kTraining = 3, kIo = 4 };

/// Maps the library's exception types to exit codes.
int exit_code_for(const std::exception& e);

/// Hash of the table fingerprint and every run setting.
std::string run_fingerprint(const RunConfig& cfg, const std::string& table_fp);

/// Loads the cached table when its fingerprint matches, otherwise builds
/// and caches it. Cache hits and misses are logged.
DistanceVectorTable cmd_table(const RunConfig& cfg, const Corpus& corpus,
                              std::ostream& log);

/// Trains on every sample; writes model.json, trace.csv and, when
/// regularizing, spectrum.csv.
MetricModel cmd_train(const RunConfig& cfg, std::ostream& log);

/// Runs each configured method on one shared plan; writes report.json,
/// report.csv, summary.txt and profiles.csv, and prints the summary. A
/// failing method is logged and skipped; the first failure's exit code is
/// returned.
int cmd_evaluate(const RunConfig& cfg, std::ostream& out, std::ostream& log);

/// Relevance of a saved model next to per-fold profiles from CV training;
/// writes relevance.csv, fold_profiles.csv, model_profile.csv and sweep.csv.
void cmd_relevance(const RunConfig& cfg, const std::filesystem::path& model_file,
                   std::ostream& out, std::ostream& log);

/// Feature-selection sweep over per-fold models; writes sweep.csv.
/// With `retrain`, LMNN is retrained on each channel subset instead of
/// restricting the CV models.
SweepCurve cmd_sweep(const RunConfig& cfg, bool retrain, std::ostream& out,
                     std::ostream& log);

/// Writes the synthetic corpus described by cfg.synth to cfg.out.
void cmd_synth(const RunConfig& cfg, std::ostream& log);

/// Full command line: dtwlmnn <subcommand> [flags].
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dtwlmnn::app
