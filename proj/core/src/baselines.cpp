#include "edgesem/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "edgesem/errors.hpp"
#include "edgesem/random.hpp"

namespace edgesem {

double average_path_length(double n) {
  if (n <= 1.0) return 0.0;
  if (n == 2.0) return 1.0;
  constexpr double kEulerGamma = 0.5772156649015329;
  const double harmonic = std::log(n - 1.0) + kEulerGamma;
  return 2.0 * harmonic - 2.0 * (n - 1.0) / n;
}

// ---------------------------------------------------------------- iforest

IsolationForest IsolationForest::fit(const Eigen::MatrixXd& rows,
                                     const IsoForestConfig& config) {
  if (rows.rows() < 2) throw DataError("isolation forest needs at least two rows");
  if (config.n_trees < 1 || config.subsample < 2)
    throw ConfigError("isolation forest needs >= 1 tree and subsample >= 2");

  IsolationForest forest;
  forest.n_features_ = rows.cols();
  forest.sample_size_ =
      static_cast<int>(std::min<Eigen::Index>(config.subsample, rows.rows()));
  forest.max_depth_ =
      static_cast<int>(std::ceil(std::log2(static_cast<double>(forest.sample_size_))));

  const auto n = static_cast<std::size_t>(rows.rows());
  forest.trees_.reserve(static_cast<std::size_t>(config.n_trees));
  for (int t = 0; t < config.n_trees; ++t) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> sample = permutation(n, rng);
    sample.resize(static_cast<std::size_t>(forest.sample_size_));

    Tree tree;
    // Iterative growth: (node id, member rows, depth).
    struct Pending {
      int node;
      std::vector<std::size_t> members;
      int depth;
    };
    tree.push_back({});
    std::vector<Pending> stack;
    stack.push_back({0, std::move(sample), 0});
    while (!stack.empty()) {
      Pending job = std::move(stack.back());
      stack.pop_back();
      tree[static_cast<std::size_t>(job.node)].size = job.members.size();
      if (job.depth >= forest.max_depth_ || job.members.size() <= 1) continue;

      std::vector<int> candidates;
      std::vector<double> lo(static_cast<std::size_t>(rows.cols()));
      std::vector<double> hi(static_cast<std::size_t>(rows.cols()));
      for (Eigen::Index f = 0; f < rows.cols(); ++f) {
        double mn = rows(static_cast<Eigen::Index>(job.members[0]), f);
        double mx = mn;
        for (std::size_t m : job.members) {
          const double v = rows(static_cast<Eigen::Index>(m), f);
          mn = std::min(mn, v);
          mx = std::max(mx, v);
        }
        lo[static_cast<std::size_t>(f)] = mn;
        hi[static_cast<std::size_t>(f)] = mx;
        if (mx > mn) candidates.push_back(static_cast<int>(f));
      }
      if (candidates.empty()) continue;  // all members identical

      const int feature = candidates[uniform_index(rng, candidates.size())];
      const auto fi = static_cast<std::size_t>(feature);
      const double threshold = uniform(rng, lo[fi], hi[fi]);
      std::vector<std::size_t> left;
      std::vector<std::size_t> right;
      for (std::size_t m : job.members)
        (rows(static_cast<Eigen::Index>(m), feature) < threshold ? left : right)
            .push_back(m);

      const int left_id = static_cast<int>(tree.size());
      tree.push_back({});
      const int right_id = static_cast<int>(tree.size());
      tree.push_back({});
      Node& node = tree[static_cast<std::size_t>(job.node)];
      node.feature = feature;
      node.threshold = threshold;
      node.left = left_id;
      node.right = right_id;
      stack.push_back({right_id, std::move(right), job.depth + 1});
      stack.push_back({left_id, std::move(left), job.depth + 1});
    }
    forest.trees_.push_back(std::move(tree));
  }
  return forest;
}

double IsolationForest::path_length(const Tree& tree,
                                    const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  int node = 0;
  double depth = 0.0;
  while (tree[static_cast<std::size_t>(node)].feature >= 0) {
    const Node& n = tree[static_cast<std::size_t>(node)];
    node = row[n.feature] < n.threshold ? n.left : n.right;
    depth += 1.0;
  }
  return depth +
         average_path_length(static_cast<double>(tree[static_cast<std::size_t>(node)].size));
}

double IsolationForest::score(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  if (row.size() != n_features_)
    throw SchemaError("isolation forest row width mismatch");
  double total = 0.0;
  for (const Tree& t : trees_) total += path_length(t, row);
  const double mean_path = total / static_cast<double>(trees_.size());
  return std::exp2(-mean_path / average_path_length(sample_size_));
}

Eigen::VectorXd IsolationForest::score_rows(const Eigen::MatrixXd& rows) const {
  Eigen::VectorXd out(rows.rows());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) out[i] = score(rows.row(i));
  return out;
}

// ---------------------------------------------------------------- autoencoder

Autoencoder::Autoencoder(FeatureStats stats, int input_dim, int hidden, int latent)
    : stats_(std::move(stats)) {
  w_.w1 = Eigen::MatrixXd::Zero(hidden, input_dim);
  w_.b1 = Eigen::RowVectorXd::Zero(hidden);
  w_.w2 = Eigen::MatrixXd::Zero(latent, hidden);
  w_.b2 = Eigen::RowVectorXd::Zero(latent);
  w_.w3 = Eigen::MatrixXd::Zero(hidden, latent);
  w_.b3 = Eigen::RowVectorXd::Zero(hidden);
  w_.w4 = Eigen::MatrixXd::Zero(input_dim, hidden);
  w_.b4 = Eigen::RowVectorXd::Zero(input_dim);
}

namespace {

struct AeForward {
  Eigen::MatrixXd a1, h1, lat, a3, h3, out;
};

AeForward ae_forward(const Autoencoder::Weights& w, const Eigen::MatrixXd& x) {
  AeForward f;
  f.a1 = (x * w.w1.transpose()).rowwise() + w.b1;
  f.h1 = f.a1.cwiseMax(0.0);
  f.lat = (f.h1 * w.w2.transpose()).rowwise() + w.b2;
  f.a3 = (f.lat * w.w3.transpose()).rowwise() + w.b3;
  f.h3 = f.a3.cwiseMax(0.0);
  f.out = (f.h3 * w.w4.transpose()).rowwise() + w.b4;
  return f;
}

struct AdamState {
  Eigen::MatrixXd m;
  Eigen::MatrixXd v;
};

template <class Array>
void adam_update(Array& param, const Array& grad, AdamState& s, double lr, long t) {
  constexpr double b1 = 0.9;
  constexpr double b2 = 0.999;
  constexpr double eps = 1e-8;
  if (s.m.size() == 0) {
    s.m = Eigen::MatrixXd::Zero(param.rows(), param.cols());
    s.v = Eigen::MatrixXd::Zero(param.rows(), param.cols());
  }
  s.m = b1 * s.m + (1.0 - b1) * grad;
  s.v = b2 * s.v + (1.0 - b2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  param -= (lr * (s.m / c1).array() / ((s.v / c2).array().sqrt() + eps)).matrix();
}

}  // namespace

Autoencoder Autoencoder::fit(const Eigen::MatrixXd& raw_rows,
                             const AutoencoderConfig& config) {
  if (raw_rows.rows() < 1) throw DataError("autoencoder needs training rows");
  if (config.epochs < 1 || config.batch_size < 1 || !(config.learning_rate > 0.0))
    throw ConfigError("invalid autoencoder training configuration");

  FeatureStats stats;
  stats.floor = 1e-6;
  stats.mean = raw_rows.colwise().mean();
  stats.stddev = ((raw_rows.rowwise() - stats.mean).array().square().colwise().mean())
                     .sqrt()
                     .max(stats.floor)
                     .matrix();
  const Eigen::MatrixXd x = standardize_rows(raw_rows, stats);

  const auto d = static_cast<int>(raw_rows.cols());
  Autoencoder ae(stats, d, config.hidden, config.latent);
  Rng rng(config.seed);
  auto init = [&](Eigen::MatrixXd& w) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uniform(rng, -bound, bound);
  };
  Weights& w = ae.w_;
  init(w.w1);
  init(w.w2);
  init(w.w3);
  init(w.w4);

  std::array<AdamState, 8> state;
  long t = 0;
  const auto n = static_cast<std::size_t>(x.rows());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<std::size_t> order = permutation(n, rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(config.batch_size));
      Eigen::MatrixXd batch(static_cast<Eigen::Index>(end - start), x.cols());
      for (std::size_t i = start; i < end; ++i)
        batch.row(static_cast<Eigen::Index>(i - start)) = x.row(static_cast<Eigen::Index>(order[i]));

      const AeForward f = ae_forward(w, batch);
      const Eigen::MatrixXd diff = f.out - batch;
      const double scale = 1.0 / static_cast<double>(diff.size());
      const double loss = diff.squaredNorm() * scale;
      if (!std::isfinite(loss)) throw NumericError("autoencoder loss became non-finite");
      epoch_loss += loss * static_cast<double>(end - start);

      const Eigen::MatrixXd d_out = 2.0 * scale * diff;
      const Eigen::MatrixXd g_w4 = d_out.transpose() * f.h3;
      const Eigen::RowVectorXd g_b4 = d_out.colwise().sum();
      const Eigen::MatrixXd d_a3 =
          (f.a3.array() > 0.0).select(d_out * w.w4, 0.0);
      const Eigen::MatrixXd g_w3 = d_a3.transpose() * f.lat;
      const Eigen::RowVectorXd g_b3 = d_a3.colwise().sum();
      const Eigen::MatrixXd d_lat = d_a3 * w.w3;
      const Eigen::MatrixXd g_w2 = d_lat.transpose() * f.h1;
      const Eigen::RowVectorXd g_b2 = d_lat.colwise().sum();
      const Eigen::MatrixXd d_a1 =
          (f.a1.array() > 0.0).select(d_lat * w.w2, 0.0);
      const Eigen::MatrixXd g_w1 = d_a1.transpose() * batch;
      const Eigen::RowVectorXd g_b1 = d_a1.colwise().sum();

      ++t;
      const double lr = config.learning_rate;
      adam_update(w.w1, g_w1, state[0], lr, t);
      adam_update(w.b1, g_b1, state[1], lr, t);
      adam_update(w.w2, g_w2, state[2], lr, t);
      adam_update(w.b2, g_b2, state[3], lr, t);
      adam_update(w.w3, g_w3, state[4], lr, t);
      adam_update(w.b3, g_b3, state[5], lr, t);
      adam_update(w.w4, g_w4, state[6], lr, t);
      adam_update(w.b4, g_b4, state[7], lr, t);
    }
    ae.loss_history_.push_back(epoch_loss / static_cast<double>(n));
  }
  return ae;
}

Eigen::MatrixXd Autoencoder::reconstruct(const Eigen::MatrixXd& standardized) const {
  return ae_forward(w_, standardized).out;
}

double Autoencoder::score(const Eigen::Ref<const Eigen::RowVectorXd>& raw_row) const {
  const Eigen::MatrixXd x = standardize_rows(Eigen::MatrixXd(raw_row), stats_);
  return (reconstruct(x) - x).cwiseAbs().mean();
}

Eigen::VectorXd Autoencoder::score_rows(const Eigen::MatrixXd& raw_rows) const {
  const Eigen::MatrixXd x = standardize_rows(raw_rows, stats_);
  return (reconstruct(x) - x).cwiseAbs().rowwise().mean();
}

}  // namespace edgesem
