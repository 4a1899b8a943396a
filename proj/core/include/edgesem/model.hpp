#pragma once

#include <Eigen/Core>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "edgesem/graph_builder.hpp"
#include "edgesem/random.hpp"

namespace edgesem {

struct ModelDims {
  int node_dim = kNodeFeatureDim;
  int edge_dim = kEdgeFeatureDim;
  int hidden = 128;
  int reg_dim = kRegTargetDim;
  int num_classes = kNumBuckets;

  /// Width of the edge representation: z_i, z_j, e, |z_i - z_j|, z_i*z_j, g.
  int repr_dim() const { return 5 * hidden + edge_dim; }
  bool operator==(const ModelDims&) const = default;
};

/// Edge-aware message-passing layer:
///   h_i' = mlp((1 + eps) h_i + sum_{j->i} relu(h_j + edge_w e_ji + edge_b))
/// with mlp = w2 relu(w1 u + b1) + b2.
struct GineLayerParams {
  Eigen::MatrixXd edge_w;  ///< hidden x edge_dim
  Eigen::RowVectorXd edge_b;
  Eigen::MatrixXd mlp_w1;  ///< hidden x hidden
  Eigen::RowVectorXd mlp_b1;
  Eigen::MatrixXd mlp_w2;  ///< hidden x hidden
  Eigen::RowVectorXd mlp_b2;
};

/// Two-layer decoder head: w2 relu(w1 r + b1) + b2.
struct HeadParams {
  Eigen::MatrixXd w1;  ///< hidden x repr_dim
  Eigen::RowVectorXd b1;
  Eigen::MatrixXd w2;  ///< out x hidden
  Eigen::RowVectorXd b2;
};

/// Every learnable array of the network. Weight matrices are stored as
/// (out x in) and applied to row-vector activations as X * W^T.
///
/// The same struct doubles as the gradient container.
struct ModelParams {
  ModelDims dims;
  double dropout = 0.2;
  double epsilon = 0.0;  ///< fixed self-weight term, not learned

  Eigen::MatrixXd in_w;  ///< hidden x node_dim
  Eigen::RowVectorXd in_b;
  Eigen::RowVectorXd ln_gain;
  Eigen::RowVectorXd ln_bias;
  std::array<GineLayerParams, 2> layers;
  Eigen::MatrixXd fuse_w;  ///< hidden x 3*hidden
  Eigen::RowVectorXd fuse_b;
  HeadParams reg_head;
  HeadParams cls_head;

  /// All arrays zero (layer-norm gain included).
  static ModelParams zeros(const ModelDims& dims = {});
  /// Fan-in scaled uniform weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero
  /// biases, unit layer-norm gain.
  static ModelParams initialize(const ModelDims& dims, std::uint64_t seed);

  std::size_t parameter_count() const;
  bool all_finite() const;
};

/// Calls f(name, array) for every learnable array in a fixed order. Works on
/// const and non-const params; `array` is a MatrixXd or RowVectorXd.
template <class Params, class F>
void for_each_parameter(Params& p, F&& f) {
  f(std::string_view("in_w"), p.in_w);
  f(std::string_view("in_b"), p.in_b);
  f(std::string_view("ln_gain"), p.ln_gain);
  f(std::string_view("ln_bias"), p.ln_bias);
  static constexpr std::string_view layer_names[2][6] = {
      {"gine1.edge_w", "gine1.edge_b", "gine1.mlp_w1", "gine1.mlp_b1",
       "gine1.mlp_w2", "gine1.mlp_b2"},
      {"gine2.edge_w", "gine2.edge_b", "gine2.mlp_w1", "gine2.mlp_b1",
       "gine2.mlp_w2", "gine2.mlp_b2"}};
  for (std::size_t l = 0; l < 2; ++l) {
    auto& layer = p.layers[l];
    f(layer_names[l][0], layer.edge_w);
    f(layer_names[l][1], layer.edge_b);
    f(layer_names[l][2], layer.mlp_w1);
    f(layer_names[l][3], layer.mlp_b1);
    f(layer_names[l][4], layer.mlp_w2);
    f(layer_names[l][5], layer.mlp_b2);
  }
  f(std::string_view("fuse_w"), p.fuse_w);
  f(std::string_view("fuse_b"), p.fuse_b);
  f(std::string_view("reg.w1"), p.reg_head.w1);
  f(std::string_view("reg.b1"), p.reg_head.b1);
  f(std::string_view("reg.w2"), p.reg_head.w2);
  f(std::string_view("reg.b2"), p.reg_head.b2);
  f(std::string_view("cls.w1"), p.cls_head.w1);
  f(std::string_view("cls.b1"), p.cls_head.b1);
  f(std::string_view("cls.w2"), p.cls_head.w2);
  f(std::string_view("cls.b2"), p.cls_head.b2);
}

// ---- individual stages (inference mode, no dropout) ----

/// relu(layer_norm(X W^T + b)) with learnable gain and bias.
Eigen::MatrixXd input_projection(const ModelParams& params,
                                 const Eigen::MatrixXd& node_features);

/// One message-passing layer over incoming edges. `edge_attr` holds the
/// (possibly masked) attributes row-aligned with `edges`.
Eigen::MatrixXd gine_layer(const Eigen::MatrixXd& h, std::span<const Edge> edges,
                           const Eigen::MatrixXd& edge_attr,
                           const GineLayerParams& layer, double epsilon = 0.0);

/// Fusion map applied to [h0 | h1 | h2].
Eigen::MatrixXd fuse_levels(const ModelParams& params, const Eigen::MatrixXd& h0,
                            const Eigen::MatrixXd& h1, const Eigen::MatrixXd& h2);

/// Arithmetic mean of the rows of z.
Eigen::RowVectorXd graph_summary(const Eigen::MatrixXd& z);

/// [z_i | z_j | e_ij | |z_i - z_j| | z_i * z_j | g]
Eigen::RowVectorXd edge_representation(const Eigen::RowVectorXd& z_i,
                                       const Eigen::RowVectorXd& z_j,
                                       const Eigen::RowVectorXd& edge_attr,
                                       const Eigen::RowVectorXd& g);

struct DecodedEdge {
  Eigen::RowVectorXd reg;     ///< predicted log1p count, bytes, packets
  Eigen::RowVectorXd logits;  ///< raw web/dns/other logits
};

DecodedEdge decode_edge(const ModelParams& params, const Eigen::RowVectorXd& r);

/// Node-level encoder output.
struct EncodedSnapshot {
  Eigen::MatrixXd z;      ///< |V| x hidden
  Eigen::RowVectorXd g;   ///< mean of z rows
  Eigen::MatrixXd edge_attr;  ///< masked edge attributes used for encoding
};

/// Edge attributes with every flagged row zeroed.
Eigen::MatrixXd masked_edge_attributes(const Eigen::MatrixXd& edge_features,
                                       std::span<const std::uint8_t> mask);

EncodedSnapshot encode(const ModelParams& params, const GraphSnapshot& snapshot,
                       std::span<const std::uint8_t> mask);

// ---- full forward / backward ----

struct ForwardOptions {
  bool training = false;       ///< enables dropout
  Rng* dropout_rng = nullptr;  ///< required when training with dropout > 0
};

struct EdgePredictions {
  std::vector<std::size_t> edge_ids;  ///< snapshot edge index per row
  Eigen::MatrixXd reg;                ///< rows x reg_dim
  Eigen::MatrixXd logits;             ///< rows x num_classes
};

/// Runs the network on one snapshot (node features already standardized)
/// and keeps every intermediate needed for backpropagation.
///
/// `mask` flags edges whose attributes are zeroed in both message-passing
/// layers and in the edge representation. Only `decode_edges` are decoded.
class ForwardPass {
 public:
  ForwardPass(const ModelParams& params, const GraphSnapshot& snapshot,
              std::span<const std::uint8_t> mask,
              std::span<const std::size_t> decode_edges,
              const ForwardOptions& options = {});

  const EdgePredictions& predictions() const { return out_; }
  const Eigen::MatrixXd& z() const { return z_; }
  const Eigen::RowVectorXd& g() const { return g_; }

  /// Parameter gradients given dLoss/dreg and dLoss/dlogits for the decoded
  /// rows.
  ModelParams backward(const Eigen::MatrixXd& d_reg,
                       const Eigen::MatrixXd& d_logits) const;

 private:
  struct LayerCache {
    Eigen::MatrixXd h_in;      // N x H
    Eigen::MatrixXd pre_msg;   // E x H, h_src + edge projection
    Eigen::MatrixXd u;         // N x H
    Eigen::MatrixXd a1;        // N x H
    Eigen::MatrixXd q;         // N x H after relu and dropout
    Eigen::MatrixXd q_mask;    // dropout scale, empty if none
  };
  struct HeadCache {
    Eigen::MatrixXd a;       // K x H
    Eigen::MatrixXd hidden;  // K x H after relu and dropout
    Eigen::MatrixXd mask;    // dropout scale, empty if none
  };

  void run_layer(std::size_t l, const Eigen::MatrixXd& h_in, Eigen::MatrixXd& h_out);
  Eigen::MatrixXd run_head(const HeadParams& head, HeadCache& cache);
  Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols);
  void backward_head(const HeadParams& head, const HeadCache& cache,
                     const Eigen::MatrixXd& d_out, HeadParams& grad,
                     Eigen::MatrixXd& d_repr) const;
  void backward_layer(std::size_t l, const Eigen::MatrixXd& d_out,
                      GineLayerParams& grad, Eigen::MatrixXd& d_in) const;

  const ModelParams& params_;
  const GraphSnapshot& snapshot_;
  ForwardOptions options_;
  bool dropout_active_ = false;

  Eigen::MatrixXd edge_attr_;  // E x edge_dim, masked rows zeroed
  // input projection
  Eigen::MatrixXd ln_hat_;     // normalized pre-activation
  Eigen::VectorXd ln_inv_std_;
  Eigen::MatrixXd ln_out_;     // gain/bias applied, before relu
  Eigen::MatrixXd h0_, h1_, h2_;
  std::array<LayerCache, 2> layer_cache_;
  // fusion
  Eigen::MatrixXd fuse_in_;    // N x 3H after dropout
  Eigen::MatrixXd fuse_mask_;
  Eigen::MatrixXd z_;
  Eigen::RowVectorXd g_;
  // decoding
  Eigen::MatrixXd repr_;       // K x repr_dim
  HeadCache reg_cache_;
  HeadCache cls_cache_;
  EdgePredictions out_;
};

/// Inference-mode predictions for every edge under the given mask.
EdgePredictions forward(const ModelParams& params, const GraphSnapshot& snapshot,
                        std::span<const std::uint8_t> mask);

/// Softmax of one logit row, numerically stabilized.
Eigen::RowVectorXd softmax(const Eigen::RowVectorXd& logits);

}  // namespace edgesem
