#pragma once

#include <Eigen/Core>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "edgesem/flow_ingest.hpp"

namespace edgesem {

inline constexpr int kNodeFeatureDim = 51;
inline constexpr int kEdgeFeatureDim = 9;
inline constexpr int kRegTargetDim = 3;
inline constexpr int kNumBuckets = 3;
inline constexpr const char* kFeatureLayoutVersion = "v1-n51-e9";

/// Coarse destination-port class. Declaration order is the tie-break order.
enum class PortBucket : std::uint8_t { web = 0, dns = 1, other = 2 };

const char* to_string(PortBucket b);

/// 80/443 -> web, 53 -> dns, anything else (or absent) -> other.
PortBucket port_bucket(std::optional<std::uint16_t> dst_port);

/// Ordered pair of host indices into GraphSnapshot::hosts.
struct Edge {
  int src = 0;
  int dst = 0;
  bool operator==(const Edge&) const = default;
};

/// All flows of one window between an ordered host pair.
struct EdgeAggregate {
  int src = 0;
  int dst = 0;
  double flow_count = 0.0;
  double bytes = 0.0;
  double packets = 0.0;
  double duration = 0.0;
  std::array<double, kNumBuckets> bucket_flows{};
  std::array<double, kNumBuckets> bucket_bytes{};
};

/// Hosts in order of first appearance plus one aggregate per ordered pair,
/// also in order of first appearance.
struct AggregatedWindow {
  std::vector<std::string> hosts;
  std::vector<EdgeAggregate> edges;
};

AggregatedWindow aggregate_edges(const WindowBatch& batch);

/// Most flows, then most bytes, then web > dns > other.
PortBucket dominant_bucket(const EdgeAggregate& agg);

struct EdgeFeatures {
  /// [log1p count, log1p bytes, log1p packets, onehot(bucket) x3,
  ///  log1p bytes/flow, log1p packets/flow, log1p bytes/max(packets,1)]
  std::array<double, kEdgeFeatureDim> features{};
  std::array<double, kRegTargetDim> reg_target{};
  PortBucket bucket = PortBucket::other;
};

EdgeFeatures compute_edge_features(const EdgeAggregate& agg);

/// Denominator of the per-direction rate statistics.
enum class RateDenominator { flow_duration, window_length };

struct NodeFeatureOptions {
  RateDenominator rate = RateDenominator::flow_duration;
  double window_seconds = 0.0;  ///< used when rate == window_length
};

/// |hosts| x 51 node feature matrix. Column layout, per host:
///
///   0..11   outgoing: log1p flows, bytes, packets, total duration; mean
///           duration; log1p bytes/s, packets/s, bytes/flow, packets/flow,
///           out-degree, bytes/degree, packets/degree
///   12..23  the same twelve statistics for incoming traffic
///   24..31  log1p total flows, bytes, packets, duration, degree,
///           bytes/degree, packets/degree, flows/degree
///   32..34  log1p unique out, in, total neighbours
///   35..37  log1p flows per out, in, total neighbour
///   38..40  out/(out+in) share of bytes, packets, flows (0/0 -> 0.5)
///   41..44  log1p bytes and packets per out-neighbour, then per in-neighbour
///   45..47  log1p bytes per packet outgoing, incoming, total
///   48..50  fraction of outgoing flows to web, dns, other
///
/// Ratios with a zero denominator are 0 except the shares in 38..40.
Eigen::MatrixXd compute_node_features(std::size_t n_hosts,
                                      std::span<const EdgeAggregate> edges,
                                      const NodeFeatureOptions& options = {});

struct NodeLabels {
  std::vector<std::uint8_t> node_labels;
  bool graph_label = false;
};

/// A host is anomalous iff it initiates at least one malicious flow.
NodeLabels assign_labels(const WindowBatch& batch,
                         std::span<const std::string> hosts);

/// One time window's directed attributed communication graph.
struct GraphSnapshot {
  std::int64_t window_index = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  std::size_t flow_count = 0;
  std::vector<std::string> hosts;
  std::vector<Edge> edges;
  Eigen::MatrixXd node_features;     ///< |V| x 51
  Eigen::MatrixXd edge_features;     ///< |E| x 9
  Eigen::MatrixXd edge_targets_reg;  ///< |E| x 3
  std::vector<PortBucket> edge_targets_cls;
  std::vector<std::uint8_t> node_labels;
  bool graph_label = false;

  std::size_t num_nodes() const { return hosts.size(); }
  std::size_t num_edges() const { return edges.size(); }
};

GraphSnapshot build_snapshot(const WindowBatch& batch,
                             const NodeFeatureOptions& options = {});

std::vector<GraphSnapshot> build_snapshots(std::span<const WindowBatch> batches,
                                           const NodeFeatureOptions& options = {});

/// Per-dimension node feature mean and floored standard deviation.
struct FeatureStats {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd stddev;
  double floor = 1e-6;
};

/// Pools all node rows of the given (benign training) snapshots.
FeatureStats fit_feature_stats(std::span<const GraphSnapshot> train,
                               double std_floor = 1e-6);
FeatureStats fit_feature_stats(const std::vector<const GraphSnapshot*>& train,
                               double std_floor = 1e-6);

/// Standardizes node features in place. Edge features and targets are left
/// in their raw log1p scale.
void standardize(GraphSnapshot& snapshot, const FeatureStats& stats);
Eigen::MatrixXd standardize_rows(const Eigen::MatrixXd& rows,
                                 const FeatureStats& stats);

/// Indices into the snapshot sequence.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// The earliest floor(fraction * n_benign) benign snapshots train; the other
/// benign snapshots and every malicious one form the test set. Both lists
/// are chronological. Throws DataError when no benign snapshot exists or the
/// training side would be empty.
SplitIndices chronological_split(std::span<const GraphSnapshot> snapshots,
                                 double train_fraction = 0.8);

}  // namespace edgesem
