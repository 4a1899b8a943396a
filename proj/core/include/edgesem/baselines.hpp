#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "edgesem/graph_builder.hpp"

namespace edgesem {

/// Expected path length of an unsuccessful BST search over n points,
/// 2 H(n-1) - 2 (n-1) / n, with c(1) = 0 and c(2) = 1.
double average_path_length(double n);

struct IsoForestConfig {
  int n_trees = 200;
  int subsample = 256;
  std::uint64_t seed = 0;
};

/// Isolation Forest over node feature rows.
class IsolationForest {
 public:
  /// Needs at least two rows. Each tree draws min(subsample, n) rows without
  /// replacement and is grown to depth ceil(log2(sample size)).
  static IsolationForest fit(const Eigen::MatrixXd& rows, const IsoForestConfig& config);

  /// 2^(-E[h(x)] / c(psi)) in (0, 1); higher is more anomalous.
  double score(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  Eigen::VectorXd score_rows(const Eigen::MatrixXd& rows) const;

  std::size_t tree_count() const { return trees_.size(); }
  int sample_size() const { return sample_size_; }
  int max_depth() const { return max_depth_; }

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::size_t size = 0;
  };
  using Tree = std::vector<Node>;

  double path_length(const Tree& tree,
                     const Eigen::Ref<const Eigen::RowVectorXd>& row) const;

  std::vector<Tree> trees_;
  int sample_size_ = 0;
  int max_depth_ = 0;
  long n_features_ = 0;
};

struct AutoencoderConfig {
  int hidden = 128;
  int latent = 32;
  int epochs = 30;
  int batch_size = 1024;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

/// Feed-forward autoencoder d -> hidden -> latent -> hidden -> d with ReLU
/// after the two hidden layers. Scores rows by mean absolute reconstruction
/// error in standardized space.
class Autoencoder {
 public:
  struct Weights {
    Eigen::MatrixXd w1, w2, w3, w4;  // (out x in)
    Eigen::RowVectorXd b1, b2, b3, b4;
  };

  /// All weights zero; rows are standardized with `stats`.
  Autoencoder(FeatureStats stats, int input_dim, int hidden, int latent);

  /// Fits standardization statistics on `raw_rows`, then trains with Adam on
  /// the mean squared reconstruction error. Throws NumericError on a
  /// non-finite loss.
  static Autoencoder fit(const Eigen::MatrixXd& raw_rows, const AutoencoderConfig& config);

  Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& standardized) const;
  double score(const Eigen::Ref<const Eigen::RowVectorXd>& raw_row) const;
  Eigen::VectorXd score_rows(const Eigen::MatrixXd& raw_rows) const;

  const FeatureStats& stats() const { return stats_; }
  Weights& weights() { return w_; }
  const Weights& weights() const { return w_; }
  const std::vector<double>& loss_history() const { return loss_history_; }

 private:
  FeatureStats stats_;
  Weights w_;
  std::vector<double> loss_history_;
};

}  // namespace edgesem
