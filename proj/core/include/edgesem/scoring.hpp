#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edgesem/graph_builder.hpp"
#include "edgesem/model.hpp"

namespace edgesem {

/// Per-edge reconstruction discrepancies.
struct RawEdgeScores {
  std::vector<double> s_reg;  ///< mean absolute error over the regressed dims
  std::vector<double> s_cls;  ///< 1 - probability of the true bucket
};

struct ScoringConstants {
  double alpha = 1.0;
  double tau_mad = 1e-3;
  double tau_clip = 10.0;
  double lambda_src = 1.0;
  double lambda_dst = 0.2;

  void validate() const;
};

/// ceil(1 / mask_ratio) groups, so every edge is masked once at inference.
std::size_t partition_group_count(double mask_ratio);

/// Disjoint seeded partition of [0, n_edges) into partition_group_count
/// groups (round-robin over a seeded permutation). Groups may be empty when
/// n_edges is small.
std::vector<std::vector<std::size_t>> inference_partition(std::size_t n_edges,
                                                          double mask_ratio,
                                                          std::uint64_t seed);

/// One inference pass per partition group with that group masked; each edge
/// is scored from the pass in which it was hidden. The snapshot must be
/// standardized with the training statistics.
RawEdgeScores score_edges(const GraphSnapshot& snapshot, const ModelParams& params,
                          double mask_ratio, std::uint64_t seed);

/// Seed used for a snapshot's inference partition within a run.
std::uint64_t snapshot_scoring_seed(std::uint64_t run_seed, std::int64_t window_index);

/// Robust centre and spread of benign raw scores.
struct CalibrationStats {
  double med_reg = 0.0;
  double mad_reg = 0.0;
  double med_cls = 0.0;
  double mad_cls = 0.0;
  std::size_t n_edges = 0;
};

/// Median with the mean-of-middle-pair convention for even sizes.
double median(std::vector<double> values);
/// Median absolute deviation from the median.
double median_absolute_deviation(const std::vector<double>& values);

/// Pools raw scores of all edges. Throws DataError when there are none.
CalibrationStats fit_calibration(std::span<const RawEdgeScores> benign_scores);

/// Scores every edge of the benign training snapshots, then pools them.
CalibrationStats fit_calibration(std::span<const GraphSnapshot> benign_train,
                                 const ModelParams& params, double mask_ratio,
                                 std::uint64_t run_seed);

/// clip((s - med) / max(mad, tau_mad), -tau_clip, tau_clip)
double robust_z(double s, double med, double mad, const ScoringConstants& c);

/// z_reg + alpha * z_cls per edge.
std::vector<double> calibrate(const RawEdgeScores& raw, const CalibrationStats& stats,
                              const ScoringConstants& c);

/// s_reg + alpha * s_cls per edge, the uncalibrated ablation.
std::vector<double> uncalibrated(const RawEdgeScores& raw, const ScoringConstants& c);

enum class AggregationOp { mean, max, q90, topk_mean };

const char* to_string(AggregationOp op);
/// Accepts mean, max, q90, topk, topk_mean.
AggregationOp parse_aggregation(const std::string& name);

/// Linear interpolation between order statistics at q * (m - 1).
double quantile_linear(std::vector<double> values, double q);

/// Mean of the largest max(floor(0.1 m), 1) values.
double topk_mean(std::vector<double> values, double ratio = 0.1);

/// Applies an operator to a non-empty multiset.
double aggregate(std::span<const double> values, AggregationOp op);

struct HostScore {
  std::size_t host = 0;      ///< index into snapshot.hosts
  double score = 0.0;
  std::size_t incident = 0;  ///< m_i, size of the weighted multiset
};

/// Host score over {lambda_src * s_ij : i->j} U {lambda_dst * s_ji : j->i}.
/// Hosts without incident edges are omitted; output is in host order.
std::vector<HostScore> aggregate_hosts(const GraphSnapshot& snapshot,
                                       std::span<const double> edge_scores,
                                       AggregationOp op, double lambda_src,
                                       double lambda_dst);

}  // namespace edgesem
