#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "edgesem/baselines.hpp"
#include "edgesem/graph_builder.hpp"
#include "edgesem/model.hpp"
#include "edgesem/scoring.hpp"
#include "edgesem/synth.hpp"
#include "edgesem/trainer.hpp"

namespace edgesem {

/// Everything a run needs. Defaults: hidden 128, dropout 0.2, mask ratio 0.2,
/// lr 1e-3, q90 aggregation.
struct RunConfig {
  std::string dataset_preset = "canonical";
  std::filesystem::path input;
  double window_seconds = 30.0;
  std::string feature_layout = kFeatureLayoutVersion;
  RateDenominator rate = RateDenominator::flow_duration;
  double train_fraction = 0.8;
  double std_floor = 1e-6;

  ModelDims dims;
  double dropout = 0.2;
  TrainConfig train;
  ScoringConstants scoring;
  AggregationOp aggregation = AggregationOp::q90;
  bool calibrated = true;
  std::vector<double> fpr_budgets = {0.01, 0.05};

  IsoForestConfig iforest;
  AutoencoderConfig autoencoder;
  SynthConfig synth;

  std::uint64_t seed = 42;
  std::filesystem::path out_dir = "edgesem-out";
  bool plots = false;

  /// Throws ConfigError on invalid values.
  void validate() const;

  /// 16 hex digits of FNV-1a over every setting that influences snapshots,
  /// training or raw scores. The aggregation operator, calibration toggle,
  /// FPR budgets, paths, plot flag and synth settings are excluded so that
  /// evaluate-time ablations share the fingerprint of their inputs.
  std::string fingerprint() const;
};

/// Parses "key = value" lines; '#' starts a comment. Unknown keys and bad
/// values throw ConfigError naming the line.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path);

/// Sets one key from its textual value.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Every key with its current value, one per line, in a fixed order.
/// parse_config(to_config_text(c)) reproduces c.
std::string to_config_text(const RunConfig& config);

}  // namespace edgesem
