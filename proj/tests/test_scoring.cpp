#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "edgesem/errors.hpp"
#include "edgesem/scoring.hpp"
#include "edgesem/trainer.hpp"
#include "support.hpp"

using namespace edgesem;

TEST(Partition, GroupCount) {
  EXPECT_EQ(partition_group_count(0.2), 5u);
  EXPECT_EQ(partition_group_count(0.3), 4u);
  EXPECT_EQ(partition_group_count(0.5), 2u);
  EXPECT_EQ(partition_group_count(1.0), 1u);
}

TEST(Partition, CoversEveryEdgeOnce) {
  for (std::size_t n : {0u, 1u, 3u, 10u, 97u}) {
    const auto groups = inference_partition(n, 0.2, 11);
    ASSERT_EQ(groups.size(), 5u);
    std::vector<int> hits(n, 0);
    for (const auto& g : groups)
      for (std::size_t e : g) ++hits[e];
    for (int h : hits) EXPECT_EQ(h, 1);
  }
  EXPECT_EQ(inference_partition(40, 0.2, 3), inference_partition(40, 0.2, 3));
  EXPECT_NE(inference_partition(40, 0.2, 3), inference_partition(40, 0.2, 4));
}

TEST(ScoreEdges, DefinitionsAndDeterminism) {
  const GraphSnapshot s = test_support::toy_snapshot(5, 8, 30);
  const ModelParams p = ModelParams::initialize({}, 5);
  const RawEdgeScores a = score_edges(s, p, 0.2, 9);
  const RawEdgeScores b = score_edges(s, p, 0.2, 9);
  EXPECT_EQ(a.s_reg, b.s_reg);
  EXPECT_EQ(a.s_cls, b.s_cls);
  ASSERT_EQ(a.s_reg.size(), s.num_edges());

  // recompute each edge from the pass in which it was masked
  const auto groups = inference_partition(s.num_edges(), 0.2, 9);
  for (const auto& g : groups) {
    if (g.empty()) continue;
    const auto flags = mask_flags(s.num_edges(), g);
    const EdgePredictions pred = forward(p, s, flags);
    for (std::size_t e : g) {
      const auto r = static_cast<Eigen::Index>(e);
      const double reg = (pred.reg.row(r) - s.edge_targets_reg.row(r)).cwiseAbs().mean();
      const double prob = softmax(pred.logits.row(r))(static_cast<int>(s.edge_targets_cls[e]));
      EXPECT_DOUBLE_EQ(a.s_reg[e], reg);
      EXPECT_DOUBLE_EQ(a.s_cls[e], 1.0 - prob);
      EXPECT_GE(a.s_cls[e], 0.0);
      EXPECT_LE(a.s_cls[e], 1.0);
    }
  }
}

TEST(Median, Conventions) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_EQ(median_absolute_deviation({1, 2, 3, 4, 5}), 1.0);
  EXPECT_EQ(median_absolute_deviation({7, 7, 7}), 0.0);
}

TEST(Calibration, WorkedExample) {
  RawEdgeScores pool;
  pool.s_reg = {1, 2, 3, 4, 5};
  pool.s_cls = {0.5, 0.5, 0.5, 0.5, 0.5};
  const CalibrationStats st = fit_calibration(std::span<const RawEdgeScores>(&pool, 1));
  EXPECT_EQ(st.med_reg, 3.0);
  EXPECT_EQ(st.mad_reg, 1.0);
  EXPECT_EQ(st.mad_cls, 0.0);
  EXPECT_EQ(st.n_edges, 5u);
  const ScoringConstants c;
  EXPECT_EQ(robust_z(100.0, 3.0, 1.0, c), 10.0);
  EXPECT_EQ(robust_z(-100.0, 3.0, 1.0, c), -10.0);
  EXPECT_EQ(robust_z(4.0, 3.0, 1.0, c), 1.0);
  // mad floored by tau_mad
  EXPECT_NEAR(robust_z(0.5005, 0.5, 0.0, c), 0.5, 1e-9);
}

TEST(Calibration, RobustToOutlier) {
  std::vector<double> v;
  for (int i = 0; i < 99; ++i) v.push_back(1.0 + 0.01 * (i % 10));
  const double med0 = median(v);
  const double mad0 = median_absolute_deviation(v);
  auto mean_std = [](const std::vector<double>& x) {
    const double m = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double s = 0.0;
    for (double y : x) s += (y - m) * (y - m);
    return std::pair{m, std::sqrt(s / static_cast<double>(x.size()))};
  };
  const auto [m0, s0] = mean_std(v);
  v.push_back(1e6);
  const auto [m1, s1] = mean_std(v);
  EXPECT_LT(std::abs(median(v) - med0), 0.01 * std::abs(m1 - m0));
  EXPECT_LT(std::abs(median_absolute_deviation(v) - mad0), 0.01 * std::abs(s1 - s0));
}

TEST(Calibration, CombinedScore) {
  RawEdgeScores raw;
  raw.s_reg = {3.0, 5.0, 100.0};
  raw.s_cls = {0.2, 0.2, 0.9};
  const CalibrationStats st{3.0, 1.0, 0.2, 0.1, 10};
  ScoringConstants c;
  const auto s = calibrate(raw, st, c);
  EXPECT_EQ(s[0], 0.0);
  EXPECT_DOUBLE_EQ(s[1], 2.0);
  EXPECT_DOUBLE_EQ(s[2], 17.0);  // z_reg clipped to 10, z_cls = 7
  c.alpha = 0.0;
  EXPECT_EQ(calibrate(raw, st, c)[1], 2.0);
  const auto u = uncalibrated(raw, ScoringConstants{});
  EXPECT_DOUBLE_EQ(u[2], 100.9);
}

TEST(Calibration, MonotoneAndBounded) {
  Rng rng(1);
  const ScoringConstants c;
  for (int i = 0; i < 2000; ++i) {
    const double med = uniform(rng, -1, 1), mad = uniform(rng, 0, 0.5);
    const double a = uniform(rng, -50, 50), b = uniform(rng, -50, 50);
    const double za = robust_z(a, med, mad, c), zb = robust_z(b, med, mad, c);
    EXPECT_LE(std::abs(za), c.tau_clip);
    if (a <= b) EXPECT_LE(za, zb);
  }
}

TEST(Calibration, BenignMedianIsZero) {
  std::vector<GraphSnapshot> train;
  for (std::uint64_t s = 0; s < 4; ++s) train.push_back(test_support::toy_snapshot(70 + s, 8, 25));
  const ModelParams p = ModelParams::initialize({}, 2);
  const CalibrationStats st = fit_calibration(train, p, 0.2, 42);
  std::vector<double> z;
  for (const auto& s : train) {
    const RawEdgeScores raw = score_edges(s, p, 0.2, snapshot_scoring_seed(42, s.window_index));
    for (double v : raw.s_reg) z.push_back(robust_z(v, st.med_reg, st.mad_reg, ScoringConstants{}));
  }
  EXPECT_LE(std::abs(median(z)), 1e-9);
  EXPECT_THROW(fit_calibration(std::span<const RawEdgeScores>{}), DataError);
}

TEST(Aggregation, Operators) {
  const std::vector<double> v = {2, 2, 4};
  EXPECT_DOUBLE_EQ(aggregate(v, AggregationOp::mean), 8.0 / 3.0);
  EXPECT_EQ(aggregate(v, AggregationOp::max), 4.0);
  EXPECT_NEAR(aggregate(v, AggregationOp::q90), 3.6, 1e-12);
  EXPECT_EQ(aggregate(v, AggregationOp::topk_mean), 4.0);
  EXPECT_EQ(topk_mean({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20}), 19.5);
  EXPECT_EQ(quantile_linear({5}, 0.9), 5.0);
  EXPECT_EQ(quantile_linear({0, 10}, 0.9), 9.0);
  for (auto op : {AggregationOp::mean, AggregationOp::max, AggregationOp::q90, AggregationOp::topk_mean})
    EXPECT_EQ(aggregate(std::vector<double>{3.5}, op), 3.5);
}

TEST(Aggregation, ParseNames) {
  EXPECT_EQ(parse_aggregation("q90"), AggregationOp::q90);
  EXPECT_EQ(parse_aggregation("topk"), AggregationOp::topk_mean);
  EXPECT_EQ(parse_aggregation("topk_mean"), AggregationOp::topk_mean);
  EXPECT_EQ(parse_aggregation("max"), AggregationOp::max);
  EXPECT_EQ(parse_aggregation("mean"), AggregationOp::mean);
  EXPECT_THROW(parse_aggregation("median"), ConfigError);
  EXPECT_STREQ(to_string(AggregationOp::q90), "q90");
}

TEST(Aggregation, Dominance) {
  Rng rng(2);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> v(1 + uniform_index(rng, 30));
    for (double& x : v) x = uniform(rng, -10, 10);
    const double mean = aggregate(v, AggregationOp::mean);
    const double max = aggregate(v, AggregationOp::max);
    EXPECT_GE(max, aggregate(v, AggregationOp::q90));
    EXPECT_GE(max, mean);
    EXPECT_GE(max, aggregate(v, AggregationOp::topk_mean));
    EXPECT_GE(aggregate(v, AggregationOp::topk_mean), mean - 1e-12);
  }
}

TEST(HostAggregation, WeightedMultiset) {
  GraphSnapshot s;
  s.hosts = {"A", "B", "C", "D", "E"};
  s.edges = {{0, 1}, {0, 2}, {3, 0}};
  const std::vector<double> scores = {2.0, 4.0, 10.0};
  const auto hosts = aggregate_hosts(s, scores, AggregationOp::mean, 1.0, 0.2);
  ASSERT_EQ(hosts.size(), 4u);  // E has no edges
  EXPECT_EQ(hosts[0].host, 0u);
  EXPECT_EQ(hosts[0].incident, 3u);
  EXPECT_DOUBLE_EQ(hosts[0].score, 8.0 / 3.0);
  EXPECT_DOUBLE_EQ(hosts[1].score, 0.4);
  EXPECT_EQ(hosts[3].host, 3u);
  EXPECT_EQ(hosts[3].score, 10.0);

  const auto src_only = aggregate_hosts(s, scores, AggregationOp::mean, 1.0, 0.0);
  EXPECT_EQ(src_only[0].incident, 3u);
  EXPECT_DOUBLE_EQ(src_only[0].score, 2.0);
  EXPECT_EQ(src_only[1].score, 0.0);
}
