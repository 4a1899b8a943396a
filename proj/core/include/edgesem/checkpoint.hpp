#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "edgesem/graph_builder.hpp"
#include "edgesem/model.hpp"

namespace edgesem {

inline constexpr int kCheckpointFormatVersion = 1;

/// Trained model plus everything needed to score new snapshots.
///
/// JSON document with "format_version", "fingerprint", "feature_layout",
/// "seed", "dims", "dropout", "epsilon", "feature_stats" and "parameters", a
/// list of {"name", "rows", "cols", "data"} in for_each_parameter order with
/// row-major data. Loading rejects any array whose shape disagrees with dims.
struct Checkpoint {
  std::string fingerprint;
  std::string feature_layout = kFeatureLayoutVersion;
  std::uint64_t seed = 0;
  ModelParams params;
  FeatureStats feature_stats;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace edgesem
