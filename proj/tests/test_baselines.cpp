#include <gtest/gtest.h>

#include <cmath>

#include "edgesem/baselines.hpp"
#include "edgesem/errors.hpp"
#include "edgesem/random.hpp"

using namespace edgesem;

namespace {

Eigen::MatrixXd cluster(int n, int d, double centre, double spread, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = centre + spread * standard_normal(rng);
  return x;
}

}  // namespace

TEST(IsolationForest, AveragePathLength) {
  EXPECT_EQ(average_path_length(1), 0.0);
  EXPECT_EQ(average_path_length(2), 1.0);
  const double c256 = 2.0 * (std::log(255.0) + 0.5772156649015329) - 2.0 * 255.0 / 256.0;
  EXPECT_NEAR(average_path_length(256), c256, 1e-12);
}

TEST(IsolationForest, OutlierScoresHigher) {
  Eigen::MatrixXd train = cluster(300, 4, 0.0, 1.0, 1);
  train.topRows(100).setConstant(0.5);  // a heavily duplicated point
  const IsolationForest f = IsolationForest::fit(train, {100, 256, 3});
  EXPECT_EQ(f.tree_count(), 100u);
  EXPECT_EQ(f.sample_size(), 256);
  EXPECT_EQ(f.max_depth(), 8);
  const Eigen::RowVectorXd dup = Eigen::RowVectorXd::Constant(4, 0.5);
  const Eigen::RowVectorXd far = Eigen::RowVectorXd::Constant(4, 25.0);
  EXPECT_LT(f.score(dup), f.score(far));
  const Eigen::VectorXd s = f.score_rows(train);
  EXPECT_GT(s.minCoeff(), 0.0);
  EXPECT_LT(s.maxCoeff(), 1.0);
}

TEST(IsolationForest, TwoIdenticalPoints) {
  const Eigen::MatrixXd train = Eigen::MatrixXd::Constant(2, 3, 1.0);
  const IsolationForest f = IsolationForest::fit(train, {10, 256, 1});
  EXPECT_EQ(f.score(train.row(0)), f.score(train.row(1)));
  EXPECT_THROW(IsolationForest::fit(Eigen::MatrixXd::Zero(1, 3), {}), DataError);
}

TEST(IsolationForest, SeededDeterminism) {
  const Eigen::MatrixXd train = cluster(500, 5, 0.0, 1.0, 2);
  const Eigen::MatrixXd probe = cluster(20, 5, 0.0, 3.0, 3);
  const auto a = IsolationForest::fit(train, {50, 256, 7}).score_rows(probe);
  const auto b = IsolationForest::fit(train, {50, 256, 7}).score_rows(probe);
  const auto c = IsolationForest::fit(train, {50, 256, 8}).score_rows(probe);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(IsolationForest, FeatureOrderRoughlyIrrelevant) {
  // split candidates follow the features, so a column permutation only
  // reshuffles random draws; ordering of clear outliers is preserved
  const Eigen::MatrixXd train = cluster(400, 3, 0.0, 1.0, 4);
  Eigen::MatrixXd perm(train.rows(), 3);
  perm << train.col(2), train.col(0), train.col(1);
  const IsolationForest a = IsolationForest::fit(train, {200, 256, 5});
  const IsolationForest b = IsolationForest::fit(perm, {200, 256, 5});
  Eigen::RowVectorXd in(3), out(3), in_p(3), out_p(3);
  in << 0.1, -0.2, 0.0;
  out << 6.0, -5.0, 7.0;
  in_p << in(2), in(0), in(1);
  out_p << out(2), out(0), out(1);
  EXPECT_LT(a.score(in), a.score(out));
  EXPECT_LT(b.score(in_p), b.score(out_p));
  EXPECT_NEAR(a.score(in), b.score(in_p), 0.05);
  EXPECT_NEAR(a.score(out), b.score(out_p), 0.05);
}

TEST(Autoencoder, ZeroNetworkScoresMeanAbsInput) {
  FeatureStats stats;
  stats.mean = Eigen::RowVectorXd::Zero(4);
  stats.stddev = Eigen::RowVectorXd::Ones(4);
  const Autoencoder ae(stats, 4, 8, 2);
  Eigen::RowVectorXd x(4);
  x << 1.0, -2.0, 3.0, -4.0;
  EXPECT_DOUBLE_EQ(ae.score(x), 2.5);
}

TEST(Autoencoder, IdentityReconstructionScoresZero) {
  FeatureStats stats;
  stats.mean = Eigen::RowVectorXd::Zero(2);
  stats.stddev = Eigen::RowVectorXd::Ones(2);
  Autoencoder ae(stats, 2, 4, 4);
  auto& w = ae.weights();
  // relu(x) - relu(-x) == x, routed through non-negative latents
  w.w1 = Eigen::MatrixXd::Zero(4, 2);
  w.w1 << 1, 0, -1, 0, 0, 1, 0, -1;
  w.w2 = Eigen::MatrixXd::Identity(4, 4);
  w.w3 = Eigen::MatrixXd::Identity(4, 4);
  w.w4 = Eigen::MatrixXd::Zero(2, 4);
  w.w4 << 1, -1, 0, 0, 0, 0, 1, -1;
  Eigen::RowVectorXd x(2);
  x << 0.7, -1.3;
  EXPECT_NEAR(ae.score(x), 0.0, 1e-15);
}

TEST(Autoencoder, LearnsCluster) {
  const Eigen::MatrixXd train = cluster(400, 6, 2.0, 0.3, 10);
  AutoencoderConfig cfg;
  cfg.hidden = 16;
  cfg.latent = 4;
  cfg.epochs = 60;
  cfg.batch_size = 64;
  cfg.learning_rate = 3e-3;
  cfg.seed = 1;
  const Autoencoder ae = Autoencoder::fit(train, cfg);
  EXPECT_LT(ae.loss_history().back(), ae.loss_history().front());
  const Eigen::MatrixXd held = cluster(20, 6, 2.0, 0.3, 11);
  const Eigen::RowVectorXd far = Eigen::RowVectorXd::Constant(6, 8.0);
  const Eigen::VectorXd s = ae.score_rows(held);
  EXPECT_LT(s.maxCoeff(), ae.score(far));
  EXPECT_GE(s.minCoeff(), 0.0);
  const Autoencoder again = Autoencoder::fit(train, cfg);
  EXPECT_EQ(again.score_rows(held), s);
}
