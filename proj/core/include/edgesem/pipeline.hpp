#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "edgesem/config.hpp"
#include "edgesem/metrics.hpp"

namespace edgesem {

/// Process exit status per failure category.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitSchema = 2,
  kExitData = 3,
  kExitNumeric = 4,
  kExitConfig = 5,
  kExitIo = 6,
  kExitMissingArtifact = 7,
};

/// Runs `stage`, reporting any exception on `err` and mapping it to an exit
/// code.
int run_guarded(const std::function<void()>& stage, std::ostream& err);

/// File names inside RunConfig::out_dir.
namespace artifacts {
inline constexpr const char* kRecords = "records.csv";
inline constexpr const char* kIngestSummary = "ingest_summary.json";
inline constexpr const char* kSnapshots = "snapshots.json";
inline constexpr const char* kCheckpoint = "checkpoint.json";
inline constexpr const char* kHistory = "history.jsonl";
inline constexpr const char* kCalibration = "calibration.json";
inline constexpr const char* kEdgeScores = "edge_scores.csv";
inline constexpr const char* kBaselineScores = "baseline_scores.csv";
inline constexpr const char* kSynthFlows = "synth_flows.csv";
inline constexpr const char* kSynthManifest = "synth_manifest.json";
inline constexpr const char* kRunConfig = "run_config.txt";
}  // namespace artifacts

/// Method name of the primary model in score files and reports.
inline constexpr const char* kModelMethod = "edgesem";

/// Optional progress sink; stages stay silent when empty.
using Logger = std::function<void(const std::string&)>;

/// Writes synth_flows.csv and synth_manifest.json; returns the CSV path.
std::filesystem::path run_synth_gen(const RunConfig& config, const Logger& log = {});
void run_ingest(const RunConfig& config, const Logger& log = {});
void run_build_graphs(const RunConfig& config, const Logger& log = {});
void run_train(const RunConfig& config, const Logger& log = {});
void run_score(const RunConfig& config, const Logger& log = {});

/// Reports of the model and both baselines under the configured operator and
/// calibration setting. Writes host_scores_<op>[_raw].csv and
/// report_<op>[_raw].{json,txt} (plus SVG plots when enabled).
std::vector<EvaluationReport> run_evaluate(const RunConfig& config, const Logger& log = {});

/// ingest, build-graphs, train, score, evaluate.
std::vector<EvaluationReport> run_all(const RunConfig& config, const Logger& log = {});

/// Suffix "<op>" or "<op>_raw" used in evaluate outputs.
std::string evaluation_tag(const RunConfig& config);

}  // namespace edgesem
