#include "edgesem/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "edgesem/errors.hpp"
#include "edgesem/trainer.hpp"

namespace edgesem {

void ScoringConstants::validate() const {
  if (!(tau_mad > 0.0)) throw ConfigError("tau_mad must be positive");
  if (!(tau_clip > 0.0)) throw ConfigError("tau_clip must be positive");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be non-negative");
  if (!(lambda_src >= 0.0) || !(lambda_dst >= 0.0))
    throw ConfigError("endpoint weights must be non-negative");
}

std::size_t partition_group_count(double mask_ratio) {
  if (!(mask_ratio > 0.0 && mask_ratio <= 1.0))
    throw ConfigError("mask_ratio must lie in (0, 1]");
  return static_cast<std::size_t>(std::ceil(1.0 / mask_ratio - 1e-9));
}

std::vector<std::vector<std::size_t>> inference_partition(std::size_t n_edges,
                                                          double mask_ratio,
                                                          std::uint64_t seed) {
  const std::size_t groups = partition_group_count(mask_ratio);
  Rng rng(seed);
  const std::vector<std::size_t> order = permutation(n_edges, rng);
  std::vector<std::vector<std::size_t>> out(groups);
  for (std::size_t pos = 0; pos < order.size(); ++pos)
    out[pos % groups].push_back(order[pos]);
  for (auto& g : out) std::sort(g.begin(), g.end());
  return out;
}

std::uint64_t snapshot_scoring_seed(std::uint64_t run_seed, std::int64_t window_index) {
  return derive_seed(run_seed ^ 0x5c0fe5c0fe5ULL, static_cast<std::uint64_t>(window_index));
}

RawEdgeScores score_edges(const GraphSnapshot& snapshot, const ModelParams& params,
                          double mask_ratio, std::uint64_t seed) {
  const std::size_t n = snapshot.edges.size();
  RawEdgeScores out;
  out.s_reg.assign(n, 0.0);
  out.s_cls.assign(n, 0.0);
  for (const auto& group : inference_partition(n, mask_ratio, seed)) {
    if (group.empty()) continue;
    const auto flags = mask_flags(n, group);
    const ForwardPass pass(params, snapshot, flags, group);
    const EdgePredictions& pred = pass.predictions();
    for (std::size_t k = 0; k < group.size(); ++k) {
      const std::size_t e = group[k];
      const auto row = static_cast<Eigen::Index>(k);
      const auto er = static_cast<Eigen::Index>(e);
      out.s_reg[e] =
          (pred.reg.row(row) - snapshot.edge_targets_reg.row(er)).cwiseAbs().mean();
      const Eigen::RowVectorXd prob = softmax(pred.logits.row(row));
      out.s_cls[e] = 1.0 - prob[static_cast<Eigen::Index>(snapshot.edge_targets_cls[e])];
    }
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw DataError("median of an empty set");
  const std::size_t n = values.size();
  const auto mid = values.begin() + static_cast<long>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

double median_absolute_deviation(const std::vector<double>& values) {
  const double med = median(values);
  std::vector<double> dev(values.size());
  std::transform(values.begin(), values.end(), dev.begin(),
                 [med](double v) { return std::abs(v - med); });
  return median(std::move(dev));
}

CalibrationStats fit_calibration(std::span<const RawEdgeScores> benign_scores) {
  std::vector<double> reg;
  std::vector<double> cls;
  for (const RawEdgeScores& s : benign_scores) {
    reg.insert(reg.end(), s.s_reg.begin(), s.s_reg.end());
    cls.insert(cls.end(), s.s_cls.begin(), s.s_cls.end());
  }
  if (reg.empty()) throw DataError("calibration pool has no benign edges");
  CalibrationStats stats;
  stats.n_edges = reg.size();
  stats.med_reg = median(reg);
  stats.mad_reg = median_absolute_deviation(reg);
  stats.med_cls = median(cls);
  stats.mad_cls = median_absolute_deviation(cls);
  return stats;
}

CalibrationStats fit_calibration(std::span<const GraphSnapshot> benign_train,
                                 const ModelParams& params, double mask_ratio,
                                 std::uint64_t run_seed) {
  std::vector<RawEdgeScores> scores;
  scores.reserve(benign_train.size());
  for (const GraphSnapshot& s : benign_train)
    scores.push_back(score_edges(s, params, mask_ratio,
                                 snapshot_scoring_seed(run_seed, s.window_index)));
  return fit_calibration(scores);
}

double robust_z(double s, double med, double mad, const ScoringConstants& c) {
  const double z = (s - med) / std::max(mad, c.tau_mad);
  return std::clamp(z, -c.tau_clip, c.tau_clip);
}

std::vector<double> calibrate(const RawEdgeScores& raw, const CalibrationStats& stats,
                              const ScoringConstants& c) {
  std::vector<double> out(raw.s_reg.size());
  for (std::size_t e = 0; e < out.size(); ++e)
    out[e] = robust_z(raw.s_reg[e], stats.med_reg, stats.mad_reg, c) +
             c.alpha * robust_z(raw.s_cls[e], stats.med_cls, stats.mad_cls, c);
  return out;
}

std::vector<double> uncalibrated(const RawEdgeScores& raw, const ScoringConstants& c) {
  std::vector<double> out(raw.s_reg.size());
  for (std::size_t e = 0; e < out.size(); ++e)
    out[e] = raw.s_reg[e] + c.alpha * raw.s_cls[e];
  return out;
}

const char* to_string(AggregationOp op) {
  switch (op) {
    case AggregationOp::mean:
      return "mean";
    case AggregationOp::max:
      return "max";
    case AggregationOp::q90:
      return "q90";
    case AggregationOp::topk_mean:
      return "topk";
  }
  return "q90";
}

AggregationOp parse_aggregation(const std::string& name) {
  if (name == "mean") return AggregationOp::mean;
  if (name == "max") return AggregationOp::max;
  if (name == "q90") return AggregationOp::q90;
  if (name == "topk" || name == "topk_mean") return AggregationOp::topk_mean;
  throw ConfigError("unknown aggregation operator '" + name +
                    "' (expected mean, max, q90 or topk)");
}

double quantile_linear(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double topk_mean(std::vector<double> values, double ratio) {
  if (values.empty()) throw DataError("top-k mean of an empty set");
  const auto k = std::max<std::size_t>(
      static_cast<std::size_t>(std::floor(ratio * static_cast<double>(values.size()) + 1e-9)),
      1);
  std::partial_sort(values.begin(), values.begin() + static_cast<long>(k),
                    values.end(), std::greater<>());
  return std::accumulate(values.begin(), values.begin() + static_cast<long>(k), 0.0) /
         static_cast<double>(k);
}

double aggregate(std::span<const double> values, AggregationOp op) {
  if (values.empty()) throw DataError("aggregation over an empty multiset");
  switch (op) {
    case AggregationOp::mean:
      return std::accumulate(values.begin(), values.end(), 0.0) /
             static_cast<double>(values.size());
    case AggregationOp::max:
      return *std::max_element(values.begin(), values.end());
    case AggregationOp::q90:
      return quantile_linear({values.begin(), values.end()}, 0.9);
    case AggregationOp::topk_mean:
      return topk_mean({values.begin(), values.end()});
  }
  return 0.0;
}

std::vector<HostScore> aggregate_hosts(const GraphSnapshot& snapshot,
                                       std::span<const double> edge_scores,
                                       AggregationOp op, double lambda_src,
                                       double lambda_dst) {
  if (edge_scores.size() != snapshot.edges.size())
    throw DataError("edge score count does not match the edge list");
  std::vector<std::vector<double>> incident(snapshot.hosts.size());
  for (std::size_t e = 0; e < snapshot.edges.size(); ++e) {
    const Edge& edge = snapshot.edges[e];
    incident[static_cast<std::size_t>(edge.src)].push_back(lambda_src * edge_scores[e]);
    incident[static_cast<std::size_t>(edge.dst)].push_back(lambda_dst * edge_scores[e]);
  }
  std::vector<HostScore> out;
  for (std::size_t h = 0; h < incident.size(); ++h) {
    if (incident[h].empty()) continue;
    out.push_back({h, aggregate(incident[h], op), incident[h].size()});
  }
  return out;
}

}  // namespace edgesem
