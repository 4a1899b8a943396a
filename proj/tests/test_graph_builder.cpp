#include <gtest/gtest.h>

#include <cmath>

#include "edgesem/errors.hpp"
#include "edgesem/graph_builder.hpp"
#include "edgesem/synth.hpp"
#include "support.hpp"

using namespace edgesem;

namespace {

FlowRecord flow(const std::string& s, const std::string& d, double bytes, double packets,
                std::optional<std::uint16_t> port = 443, bool malicious = false,
                double duration = 1.0) {
  FlowRecord r;
  r.src_host = s;
  r.dst_host = d;
  r.bytes = bytes;
  r.packets = packets;
  r.dst_port = port;
  r.duration = duration;
  r.malicious = malicious;
  r.label = malicious ? "attack" : "benign";
  return r;
}

WindowBatch batch_of(std::vector<FlowRecord> records) {
  WindowBatch b;
  b.t_end = 30.0;
  b.records = std::move(records);
  return b;
}

GraphSnapshot labelled(std::int64_t index, bool malicious) {
  GraphSnapshot s;
  s.window_index = index;
  s.graph_label = malicious;
  return s;
}

}  // namespace

TEST(PortBucket, Mapping) {
  EXPECT_EQ(port_bucket(443), PortBucket::web);
  EXPECT_EQ(port_bucket(80), PortBucket::web);
  EXPECT_EQ(port_bucket(53), PortBucket::dns);
  EXPECT_EQ(port_bucket(8080), PortBucket::other);
  EXPECT_EQ(port_bucket(std::nullopt), PortBucket::other);
}

TEST(AggregateEdges, SumsParallelFlows) {
  const auto w = aggregate_edges(batch_of({flow("A", "B", 100, 2), flow("A", "B", 50, 1)}));
  ASSERT_EQ(w.edges.size(), 1u);
  const EdgeAggregate& e = w.edges[0];
  EXPECT_EQ(e.flow_count, 2.0);
  EXPECT_EQ(e.bytes, 150.0);
  EXPECT_EQ(e.packets, 3.0);
  EXPECT_EQ(e.bucket_flows[0], 2.0);
  EXPECT_EQ(w.hosts, (std::vector<std::string>{"A", "B"}));
}

TEST(AggregateEdges, DirectionMatters) {
  const auto w = aggregate_edges(batch_of({flow("A", "B", 1, 1), flow("B", "A", 1, 1)}));
  ASSERT_EQ(w.edges.size(), 2u);
  EXPECT_EQ(w.edges[0].src, 0);
  EXPECT_EQ(w.edges[0].dst, 1);
  EXPECT_EQ(w.edges[1].src, 1);
  EXPECT_EQ(w.edges[1].dst, 0);
}

TEST(AggregateEdges, SingleFlowIdentity) {
  const auto w = aggregate_edges(batch_of({flow("A", "B", 77, 5, 53, false, 2.5)}));
  ASSERT_EQ(w.edges.size(), 1u);
  EXPECT_EQ(w.edges[0].flow_count, 1.0);
  EXPECT_EQ(w.edges[0].bytes, 77.0);
  EXPECT_EQ(w.edges[0].packets, 5.0);
  EXPECT_EQ(w.edges[0].duration, 2.5);
  EXPECT_EQ(w.edges[0].bucket_flows[1], 1.0);
}

TEST(EdgeFeatures, WorkedExample) {
  EdgeAggregate agg;
  agg.flow_count = 2;
  agg.bytes = 150;
  agg.packets = 3;
  agg.bucket_flows = {2, 0, 0};
  agg.bucket_bytes = {150, 0, 0};
  const EdgeFeatures f = compute_edge_features(agg);
  const std::array<double, 9> expected = {std::log1p(2.0), std::log1p(150.0), std::log1p(3.0), 1, 0, 0,
                                          std::log1p(75.0), std::log1p(1.5), std::log1p(50.0)};
  for (int k = 0; k < 9; ++k) EXPECT_DOUBLE_EQ(f.features[k], expected[k]) << k;
  EXPECT_DOUBLE_EQ(f.reg_target[0], std::log1p(2.0));
  EXPECT_DOUBLE_EQ(f.reg_target[1], std::log1p(150.0));
  EXPECT_DOUBLE_EQ(f.reg_target[2], std::log1p(3.0));
  EXPECT_EQ(f.bucket, PortBucket::web);
}

TEST(EdgeFeatures, ZeroVolume) {
  EdgeAggregate agg;
  agg.flow_count = 1;
  agg.bucket_flows = {0, 0, 1};
  const EdgeFeatures f = compute_edge_features(agg);
  EXPECT_EQ(f.features[1], 0.0);
  EXPECT_EQ(f.features[2], 0.0);
  EXPECT_EQ(f.features[3] + f.features[4] + f.features[5], 1.0);
  EXPECT_EQ(f.features[8], 0.0);
}

TEST(EdgeFeatures, DominantBucketTies) {
  EdgeAggregate agg;
  agg.bucket_flows = {2, 0, 2};
  agg.bucket_bytes = {500, 0, 100};
  EXPECT_EQ(dominant_bucket(agg), PortBucket::web);
  agg.bucket_bytes = {100, 0, 500};
  EXPECT_EQ(dominant_bucket(agg), PortBucket::other);
  agg.bucket_bytes = {100, 0, 100};
  EXPECT_EQ(dominant_bucket(agg), PortBucket::web);
  agg.bucket_flows = {0, 3, 3};
  agg.bucket_bytes = {0, 10, 10};
  EXPECT_EQ(dominant_bucket(agg), PortBucket::dns);
  agg.bucket_flows = {1, 0, 3};
  EXPECT_EQ(dominant_bucket(agg), PortBucket::other);
}

TEST(NodeFeatures, DestinationOnlyHostHasNoOutgoing) {
  const GraphSnapshot s = build_snapshot(batch_of({flow("A", "B", 100, 2)}));
  ASSERT_EQ(s.node_features.cols(), kNodeFeatureDim);
  for (int k = 0; k < 12; ++k) EXPECT_EQ(s.node_features(1, k), 0.0) << k;
}

TEST(NodeFeatures, SingleOutgoingFlow) {
  const GraphSnapshot s = build_snapshot(batch_of({flow("A", "B", 100, 2)}));
  EXPECT_DOUBLE_EQ(s.node_features(0, 0), std::log1p(1.0));    // out flows
  EXPECT_DOUBLE_EQ(s.node_features(0, 1), std::log1p(100.0));  // out bytes
  EXPECT_DOUBLE_EQ(s.node_features(0, 32), std::log1p(1.0));   // unique out neighbours
  EXPECT_DOUBLE_EQ(s.node_features(0, 38), 1.0);               // out byte share
  EXPECT_DOUBLE_EQ(s.node_features(1, 38), 0.0);
  EXPECT_DOUBLE_EQ(s.node_features(0, 48), 1.0);               // all outgoing to web
}

TEST(NodeFeatures, IsolatedShareDefaultsToHalf) {
  const std::vector<EdgeAggregate> none;
  const Eigen::MatrixXd x = compute_node_features(1, none);
  EXPECT_EQ(x(0, 38), 0.5);
  EXPECT_EQ(x(0, 39), 0.5);
  EXPECT_EQ(x(0, 40), 0.5);
  EXPECT_EQ(x.row(0).head(38).cwiseAbs().sum(), 0.0);
}

TEST(NodeFeatures, SymmetricHostsShareRows) {
  const GraphSnapshot s = build_snapshot(
      batch_of({flow("A", "B", 100, 2), flow("B", "A", 100, 2), flow("C", "D", 7, 1), flow("D", "C", 7, 1)}));
  EXPECT_EQ(s.node_features.row(0), s.node_features.row(1));
  EXPECT_EQ(s.node_features.row(2), s.node_features.row(3));
}

TEST(NodeFeatures, WindowRateDenominator) {
  const auto w = aggregate_edges(batch_of({flow("A", "B", 300, 3, 443, false, 2.0)}));
  NodeFeatureOptions opt;
  opt.rate = RateDenominator::window_length;
  opt.window_seconds = 30.0;
  const Eigen::MatrixXd by_window = compute_node_features(2, w.edges, opt);
  const Eigen::MatrixXd by_duration = compute_node_features(2, w.edges);
  EXPECT_DOUBLE_EQ(by_window(0, 5), std::log1p(10.0));
  EXPECT_DOUBLE_EQ(by_duration(0, 5), std::log1p(150.0));
}

TEST(Labels, SourceCentric) {
  const std::vector<std::string> hosts = {"A", "B", "C"};
  auto one = assign_labels(batch_of({flow("A", "B", 1, 1, 443, true)}), hosts);
  EXPECT_EQ(one.node_labels, (std::vector<std::uint8_t>{1, 0, 0}));
  EXPECT_TRUE(one.graph_label);

  auto two = assign_labels(batch_of({flow("A", "B", 1, 1, 443, true), flow("C", "A", 1, 1, 443, true)}), hosts);
  EXPECT_EQ(two.node_labels, (std::vector<std::uint8_t>{1, 0, 1}));

  auto benign = assign_labels(batch_of({flow("A", "B", 1, 1)}), hosts);
  EXPECT_EQ(benign.node_labels, (std::vector<std::uint8_t>{0, 0, 0}));
  EXPECT_FALSE(benign.graph_label);
}

TEST(Standardize, ConstantDimensionBecomesZero) {
  Rng rng(3);
  std::vector<GraphSnapshot> train;
  for (int i = 0; i < 4; ++i) train.push_back(test_support::raw_snapshot(rng, 6, 20));
  const FeatureStats stats = fit_feature_stats(train);
  EXPECT_EQ(stats.mean.size(), kNodeFeatureDim);
  Eigen::MatrixXd rows = Eigen::MatrixXd::Constant(3, kNodeFeatureDim, 4.0);
  FeatureStats c;
  c.mean = Eigen::RowVectorXd::Constant(kNodeFeatureDim, 4.0);
  c.stddev = Eigen::RowVectorXd::Constant(kNodeFeatureDim, 1e-6);
  EXPECT_EQ(standardize_rows(rows, c).cwiseAbs().maxCoeff(), 0.0);

  Eigen::MatrixXd pooled(0, kNodeFeatureDim);
  for (const auto& t : train) {
    Eigen::MatrixXd next(pooled.rows() + t.node_features.rows(), kNodeFeatureDim);
    next << pooled, t.node_features;
    pooled = next;
  }
  const Eigen::MatrixXd z = standardize_rows(pooled, stats);
  EXPECT_LT(z.colwise().mean().cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Standardize, EmptyTrainingSetThrows) {
  EXPECT_THROW(fit_feature_stats(std::span<const GraphSnapshot>{}), ConfigError);
}

TEST(ChronologicalSplit, TenBenignTwoMalicious) {
  std::vector<GraphSnapshot> s;
  for (int i = 0; i < 12; ++i) s.push_back(labelled(i, i == 3 || i == 10));
  const SplitIndices split = chronological_split(s, 0.8);
  EXPECT_EQ(split.train.size(), 8u);
  EXPECT_EQ(split.test.size(), 4u);
  EXPECT_EQ(split.train, (std::vector<std::size_t>{0, 1, 2, 4, 5, 6, 7, 8}));
  EXPECT_EQ(split.test, (std::vector<std::size_t>{3, 9, 10, 11}));
}

TEST(ChronologicalSplit, AllBenign) {
  std::vector<GraphSnapshot> s;
  for (int i = 0; i < 10; ++i) s.push_back(labelled(i, false));
  const SplitIndices split = chronological_split(s, 0.8);
  EXPECT_EQ(split.train.size(), 8u);
  EXPECT_EQ(split.test.size(), 2u);
}

TEST(ChronologicalSplit, DegenerateSplits) {
  std::vector<GraphSnapshot> one = {labelled(0, false)};
  EXPECT_THROW(chronological_split(one, 0.8), DataError);
  std::vector<GraphSnapshot> bad = {labelled(0, true), labelled(1, true)};
  EXPECT_THROW(chronological_split(bad, 0.8), DataError);
}

TEST(BuildSnapshot, ShapesAndConservation) {
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    const GraphSnapshot s = test_support::raw_snapshot(rng, 10, 60, 0.1);
    EXPECT_EQ(s.node_features.rows(), static_cast<Eigen::Index>(s.num_nodes()));
    EXPECT_EQ(s.edge_features.rows(), static_cast<Eigen::Index>(s.num_edges()));
    EXPECT_EQ(s.edge_features.cols(), kEdgeFeatureDim);
    EXPECT_EQ(s.edge_targets_reg.cols(), kRegTargetDim);
    EXPECT_EQ(s.edge_targets_cls.size(), s.num_edges());
    EXPECT_EQ(s.node_labels.size(), s.num_nodes());
    double total = 0.0;
    for (Eigen::Index e = 0; e < s.edge_features.rows(); ++e) total += std::expm1(s.edge_features(e, 0));
    EXPECT_NEAR(total, 60.0, 1e-6);
  }
}
