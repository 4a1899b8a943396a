#include "edgesem/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "edgesem/errors.hpp"

namespace edgesem {

void TrainConfig::validate() const {
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0))
    throw ConfigError("mask_ratio must lie in (0, 1)");
  if (!(lambda_reg >= 0.0) || !(lambda_cls >= 0.0))
    throw ConfigError("loss weights must be non-negative");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw ConfigError("validation_fraction must lie in (0, 1)");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
}

std::vector<std::size_t> sample_mask(std::size_t n_edges, double ratio, Rng& rng) {
  if (n_edges == 0) throw DataError("cannot mask a snapshot without edges");
  const auto k = std::max<std::size_t>(
      static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n_edges) + 1e-9)),
      1);
  // Partial Fisher-Yates: the first k slots become a uniform k-subset.
  std::vector<std::size_t> idx(n_edges);
  for (std::size_t i = 0; i < n_edges; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + uniform_index(rng, n_edges - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<std::uint8_t> mask_flags(std::size_t n_edges,
                                     std::span<const std::size_t> masked) {
  std::vector<std::uint8_t> flags(n_edges, 0);
  for (std::size_t e : masked) {
    if (e >= n_edges) throw DataError("mask index out of range");
    flags[e] = 1;
  }
  return flags;
}

double smooth_l1(double diff) {
  const double a = std::abs(diff);
  return a < 1.0 ? 0.5 * diff * diff : a - 0.5;
}

namespace {

double smooth_l1_grad(double diff) {
  if (std::abs(diff) < 1.0) return diff;
  return diff > 0.0 ? 1.0 : -1.0;
}

// Rows of pred_* pair with targets rows target_rows[k] of the snapshot.
LossGradient rows_loss(const Eigen::MatrixXd& pred_reg,
                       const Eigen::MatrixXd& pred_logits,
                       const Eigen::MatrixXd& target_reg,
                       std::span<const PortBucket> target_cls,
                       std::span<const std::size_t> target_rows,
                       std::span<const std::size_t> pred_rows,
                       const LossWeights& w) {
  const std::size_t k = target_rows.size();
  if (k == 0) throw std::logic_error("masked loss over an empty mask");
  const double inv_k = 1.0 / static_cast<double>(k);
  const auto reg_dim = static_cast<double>(pred_reg.cols());

  LossGradient out;
  out.d_reg = Eigen::MatrixXd::Zero(pred_reg.rows(), pred_reg.cols());
  out.d_logits = Eigen::MatrixXd::Zero(pred_logits.rows(), pred_logits.cols());
  double reg_sum = 0.0;
  double cls_sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const auto t = static_cast<Eigen::Index>(target_rows[i]);
    const auto p = static_cast<Eigen::Index>(pred_rows[i]);

    double edge_reg = 0.0;
    for (Eigen::Index d = 0; d < pred_reg.cols(); ++d) {
      const double diff = pred_reg(p, d) - target_reg(t, d);
      edge_reg += smooth_l1(diff);
      out.d_reg(p, d) = w.reg * inv_k * smooth_l1_grad(diff) / reg_dim;
    }
    reg_sum += edge_reg / reg_dim;

    const Eigen::RowVectorXd logits = pred_logits.row(p);
    const double m = logits.maxCoeff();
    const double lse = m + std::log((logits.array() - m).exp().sum());
    const auto y = static_cast<Eigen::Index>(target_cls[target_rows[i]]);
    cls_sum += lse - logits[y];
    Eigen::RowVectorXd prob = (logits.array() - lse).exp();
    prob[y] -= 1.0;
    out.d_logits.row(p) = w.cls * inv_k * prob;
  }
  out.loss.reg = reg_sum * inv_k;
  out.loss.cls = cls_sum * inv_k;
  out.loss.total = w.reg * out.loss.reg + w.cls * out.loss.cls;
  return out;
}

}  // namespace

LossBreakdown masked_losses(const Eigen::MatrixXd& pred_reg,
                            const Eigen::MatrixXd& pred_logits,
                            const Eigen::MatrixXd& target_reg,
                            std::span<const PortBucket> target_cls,
                            std::span<const std::size_t> mask,
                            const LossWeights& weights) {
  if (pred_reg.rows() != target_reg.rows() ||
      pred_logits.rows() != target_reg.rows() ||
      target_cls.size() != static_cast<std::size_t>(target_reg.rows()))
    throw SchemaError("prediction and target row counts differ");
  for (std::size_t e : mask)
    if (e >= target_cls.size()) throw DataError("mask index out of range");
  return rows_loss(pred_reg, pred_logits, target_reg, target_cls, mask, mask,
                   weights)
      .loss;
}

LossGradient loss_and_gradient(const EdgePredictions& predictions,
                               const GraphSnapshot& snapshot,
                               const LossWeights& weights) {
  std::vector<std::size_t> pred_rows(predictions.edge_ids.size());
  for (std::size_t i = 0; i < pred_rows.size(); ++i) pred_rows[i] = i;
  return rows_loss(predictions.reg, predictions.logits, snapshot.edge_targets_reg,
                   snapshot.edge_targets_cls, predictions.edge_ids, pred_rows,
                   weights);
}

// ---------------------------------------------------------------- AdamW

AdamW::AdamW(const ModelParams& like, const TrainConfig& config)
    : cfg_(config),
      m_(ModelParams::zeros(like.dims)),
      v_(ModelParams::zeros(like.dims)) {}

void AdamW::step(ModelParams& params, const ModelParams& grad) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const double lr = cfg_.learning_rate;
  const double decay = 1.0 - lr * cfg_.weight_decay;

  std::vector<double*> p_data, g_data, m_data, v_data;
  std::vector<Eigen::Index> sizes;
  for_each_parameter(params, [&](std::string_view, auto& a) {
    p_data.push_back(a.data());
    sizes.push_back(a.size());
  });
  for_each_parameter(grad, [&](std::string_view, const auto& a) {
    g_data.push_back(const_cast<double*>(a.data()));
  });
  for_each_parameter(m_, [&](std::string_view, auto& a) { m_data.push_back(a.data()); });
  for_each_parameter(v_, [&](std::string_view, auto& a) { v_data.push_back(a.data()); });

  for (std::size_t k = 0; k < p_data.size(); ++k) {
    double* p = p_data[k];
    const double* g = g_data[k];
    double* m = m_data[k];
    double* v = v_data[k];
    for (Eigen::Index i = 0; i < sizes[k]; ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] = p[i] * decay - lr * m_hat / (std::sqrt(v_hat) + cfg_.adam_eps);
    }
  }
}

// ---------------------------------------------------------------- training

namespace {

bool finite(const LossBreakdown& l) {
  return std::isfinite(l.reg) && std::isfinite(l.cls) && std::isfinite(l.total);
}

void accumulate(LossBreakdown& acc, const LossBreakdown& l) {
  acc.reg += l.reg;
  acc.cls += l.cls;
  acc.total += l.total;
}

LossBreakdown averaged(LossBreakdown acc, std::size_t n) {
  if (n == 0) return acc;
  const double inv = 1.0 / static_cast<double>(n);
  return {acc.reg * inv, acc.cls * inv, acc.total * inv};
}

constexpr std::uint64_t kSplitSalt = 11;
constexpr std::uint64_t kInitSalt = 12;
constexpr std::uint64_t kTrainStreamSalt = 13;
constexpr std::uint64_t kValidationMaskSalt = 1000;

}  // namespace

LossBreakdown evaluate_loss(const ModelParams& params,
                            std::span<const GraphSnapshot> snapshots,
                            std::span<const std::size_t> indices,
                            const TrainConfig& config) {
  const LossWeights w{config.lambda_reg, config.lambda_cls};
  LossBreakdown acc;
  std::size_t n = 0;
  for (std::size_t idx : indices) {
    const GraphSnapshot& s = snapshots[idx];
    if (s.edges.empty()) continue;
    Rng rng(derive_seed(config.seed, kValidationMaskSalt + idx));
    const auto mask = sample_mask(s.edges.size(), config.mask_ratio, rng);
    const auto flags = mask_flags(s.edges.size(), mask);
    const ForwardPass pass(params, s, flags, mask);
    accumulate(acc, loss_and_gradient(pass.predictions(), s, w).loss);
    ++n;
  }
  return averaged(acc, n);
}

TrainResult train(std::span<const GraphSnapshot> benign_train,
                  const TrainConfig& config, const ModelDims& dims,
                  double dropout,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  const std::size_t n = benign_train.size();
  if (n < 2)
    throw DataError("training needs at least two benign snapshots (got " +
                    std::to_string(n) + ")");

  TrainResult result;
  {
    Rng split_rng(derive_seed(config.seed, kSplitSalt));
    std::vector<std::size_t> order = permutation(n, split_rng);
    const auto n_val = std::min<std::size_t>(
        n - 1, static_cast<std::size_t>(
                   std::ceil(config.validation_fraction * static_cast<double>(n) - 1e-9)));
    result.validation_indices.assign(order.begin(), order.begin() + static_cast<long>(n_val));
    result.train_indices.assign(order.begin() + static_cast<long>(n_val), order.end());
    std::sort(result.validation_indices.begin(), result.validation_indices.end());
    std::sort(result.train_indices.begin(), result.train_indices.end());
  }

  ModelParams params = ModelParams::initialize(dims, derive_seed(config.seed, kInitSalt));
  params.dropout = dropout;
  AdamW optimizer(params, config);
  Rng rng(derive_seed(config.seed, kTrainStreamSalt));
  const LossWeights w{config.lambda_reg, config.lambda_cls};
  const ForwardOptions train_mode{true, &rng};

  TrainHistory& history = result.history;
  double best = std::numeric_limits<double>::infinity();
  ModelParams best_params = params;
  int since_best = 0;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::vector<std::size_t> order = result.train_indices;
    shuffle(order, rng);

    LossBreakdown acc;
    std::size_t steps = 0;
    for (std::size_t idx : order) {
      const GraphSnapshot& s = benign_train[idx];
      if (s.edges.empty()) continue;
      const auto mask = sample_mask(s.edges.size(), config.mask_ratio, rng);
      const auto flags = mask_flags(s.edges.size(), mask);
      const ForwardPass pass(params, s, flags, mask, train_mode);
      const LossGradient lg = loss_and_gradient(pass.predictions(), s, w);
      if (!finite(lg.loss))
        throw NumericError("non-finite training loss at epoch " +
                           std::to_string(epoch) + " (window " +
                           std::to_string(s.window_index) +
                           "); lower the learning rate or inspect the input data");
      optimizer.step(params, pass.backward(lg.d_reg, lg.d_logits));
      accumulate(acc, lg.loss);
      ++steps;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train = averaged(acc, steps);
    record.validation =
        evaluate_loss(params, benign_train, result.validation_indices, config);
    if (!finite(record.validation) || !params.all_finite())
      throw NumericError("non-finite validation loss at epoch " +
                         std::to_string(epoch));
    history.epochs.push_back(record);
    if (on_epoch) on_epoch(record);

    if (record.validation.total < best) {
      best = record.validation.total;
      best_params = params;
      history.best_epoch = epoch;
      history.best_validation = best;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      history.stopped_early = true;
      break;
    }
  }

  result.params = std::move(best_params);
  return result;
}

// ---------------------------------------------------------------- gradient check

GradientCheckResult gradient_check(const ModelParams& params,
                                   const GraphSnapshot& snapshot,
                                   std::span<const std::size_t> mask,
                                   const LossWeights& weights,
                                   const GradientCheckOptions& options) {
  const auto flags = mask_flags(snapshot.edges.size(), mask);
  ModelParams analytic;
  {
    const ForwardPass pass(params, snapshot, flags, mask);
    const LossGradient lg = loss_and_gradient(pass.predictions(), snapshot, weights);
    analytic = pass.backward(lg.d_reg, lg.d_logits);
  }
  if (options.corrupt) options.corrupt(analytic);

  ModelParams probe = params;
  auto loss_at = [&]() {
    const ForwardPass pass(probe, snapshot, flags, mask);
    return loss_and_gradient(pass.predictions(), snapshot, weights).loss.total;
  };

  struct Group {
    std::string name;
    double* value;
    const double* grad;
    Eigen::Index size;
  };
  std::vector<Group> groups;
  for_each_parameter(probe, [&](std::string_view name, auto& a) {
    groups.push_back({std::string(name), a.data(), nullptr, a.size()});
  });
  std::size_t gi = 0;
  for_each_parameter(analytic, [&](std::string_view, const auto& a) {
    groups[gi++].grad = a.data();
  });

  GradientCheckResult result;
  Rng rng(options.seed);
  for (const Group& g : groups) {
    if (g.size == 0) continue;
    ++result.groups;
    const auto picks = std::min<Eigen::Index>(options.coordinates_per_group, g.size);
    std::vector<std::size_t> coords = permutation(static_cast<std::size_t>(g.size), rng);
    coords.resize(static_cast<std::size_t>(picks));
    for (std::size_t c : coords) {
      const double original = g.value[c];
      g.value[c] = original + options.step;
      const double up = loss_at();
      g.value[c] = original - options.step;
      const double down = loss_at();
      g.value[c] = original;

      const double numeric = (up - down) / (2.0 * options.step);
      const double a = g.grad[c];
      const double denom =
          std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.coordinates;
      if (rel > result.max_relative_error || result.worst_parameter.empty()) {
        if (rel >= result.max_relative_error) {
          result.max_relative_error = rel;
          result.worst_parameter = g.name + "[" + std::to_string(c) + "]";
        }
      }
    }
  }
  return result;
}

}  // namespace edgesem
