#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "edgesem/graph_builder.hpp"
#include "edgesem/model.hpp"
#include "edgesem/random.hpp"

namespace edgesem {

struct TrainConfig {
  double mask_ratio = 0.2;
  double lambda_reg = 1.0;
  double lambda_cls = 1.0;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int max_epochs = 100;
  int patience = 10;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

struct LossWeights {
  double reg = 1.0;
  double cls = 1.0;
};

struct LossBreakdown {
  double reg = 0.0;
  double cls = 0.0;
  double total = 0.0;
};

/// max(floor(ratio * n_edges), 1) distinct edge indices, uniform without
/// replacement, returned in ascending order.
std::vector<std::size_t> sample_mask(std::size_t n_edges, double ratio, Rng& rng);

/// Per-edge flags for a list of masked edge indices.
std::vector<std::uint8_t> mask_flags(std::size_t n_edges,
                                     std::span<const std::size_t> masked);

/// Smooth L1 with transition point 1.
double smooth_l1(double diff);

/// Reconstruction losses over the masked edges only. Predictions and targets
/// are indexed by snapshot edge; unmasked rows are ignored. Throws
/// std::logic_error on an empty mask.
LossBreakdown masked_losses(const Eigen::MatrixXd& pred_reg,
                            const Eigen::MatrixXd& pred_logits,
                            const Eigen::MatrixXd& target_reg,
                            std::span<const PortBucket> target_cls,
                            std::span<const std::size_t> mask,
                            const LossWeights& weights);

struct LossGradient {
  LossBreakdown loss;
  Eigen::MatrixXd d_reg;     ///< rows aligned with predictions.edge_ids
  Eigen::MatrixXd d_logits;
};

/// Loss and its gradient w.r.t. decoded outputs, treating every decoded row
/// as a masked edge.
LossGradient loss_and_gradient(const EdgePredictions& predictions,
                               const GraphSnapshot& snapshot,
                               const LossWeights& weights);

/// Decoupled-weight-decay Adam over a ModelParams instance.
class AdamW {
 public:
  AdamW(const ModelParams& like, const TrainConfig& config);
  void step(ModelParams& params, const ModelParams& grad);
  long steps() const { return t_; }

 private:
  TrainConfig cfg_;
  ModelParams m_;
  ModelParams v_;
  long t_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  LossBreakdown train;
  LossBreakdown validation;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_validation = 0.0;
  bool stopped_early = false;
};

struct TrainResult {
  ModelParams params;
  TrainHistory history;
  std::vector<std::size_t> train_indices;       ///< into the input span
  std::vector<std::size_t> validation_indices;
};

/// Benign-only masked edge reconstruction training. Snapshots must already be
/// standardized. Returns the parameters of the best validation epoch.
///
/// Throws DataError with fewer than two snapshots and NumericError when a
/// loss turns non-finite.
TrainResult train(std::span<const GraphSnapshot> benign_train,
                  const TrainConfig& config, const ModelDims& dims = {},
                  double dropout = 0.2,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Validation loss of `params` with fixed seeded masks (inference mode).
LossBreakdown evaluate_loss(const ModelParams& params,
                            std::span<const GraphSnapshot> snapshots,
                            std::span<const std::size_t> indices,
                            const TrainConfig& config);

struct GradientCheckOptions {
  double step = 1e-5;
  int coordinates_per_group = 3;
  std::uint64_t seed = 7;
  /// Denominator floor of the relative error, guarding near-zero gradients.
  double denominator_floor = 1e-6;
  /// Optional hook applied to the analytic gradient before comparison.
  std::function<void(ModelParams&)> corrupt;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  std::size_t groups = 0;
  std::string worst_parameter;
};

/// Compares backpropagated gradients of the masked loss against central
/// finite differences on a sample of coordinates from every parameter array.
/// Runs in inference mode so dropout does not perturb the comparison.
GradientCheckResult gradient_check(const ModelParams& params,
                                   const GraphSnapshot& snapshot,
                                   std::span<const std::size_t> mask,
                                   const LossWeights& weights = {},
                                   const GradientCheckOptions& options = {});

}  // namespace edgesem
