#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "edgesem/graph_builder.hpp"

namespace edgesem {

inline constexpr int kSnapshotFormatVersion = 1;

/// On-disk container for a run's snapshots and its chronological split.
///
/// JSON document:
///   { "format_version": 1, "feature_layout": "...", "fingerprint": "...",
///     "train_windows": [..], "test_windows": [..],
///     "snapshots": [ { "window_index", "t_start", "t_end", "flow_count",
///                      "hosts", "edges": [[src, dst], ...],
///                      "node_features": {"rows","cols","data"},
///                      "edge_features": {...}, "edge_targets_reg": {...},
///                      "edge_targets_cls": ["web"|"dns"|"other", ...],
///                      "node_labels": [0|1, ...], "graph_label": bool } ] }
///
/// Matrices are row-major. Reals are written in shortest round-trip form so
/// reading back reproduces every value bit-for-bit.
struct SnapshotFile {
  int format_version = kSnapshotFormatVersion;
  std::string feature_layout = kFeatureLayoutVersion;
  std::string fingerprint;
  std::vector<GraphSnapshot> snapshots;
  std::vector<std::int64_t> train_windows;
  std::vector<std::int64_t> test_windows;
};

void write_snapshot_file(const std::filesystem::path& path,
                         const SnapshotFile& file);
SnapshotFile read_snapshot_file(const std::filesystem::path& path);

}  // namespace edgesem
