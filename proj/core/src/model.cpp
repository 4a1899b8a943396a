#include "edgesem/model.hpp"

#include <cmath>
#include <string>

#include "edgesem/errors.hpp"

namespace edgesem {

namespace {

constexpr double kLayerNormEps = 1e-5;

Eigen::MatrixXd relu(const Eigen::MatrixXd& x) { return x.cwiseMax(0.0); }

Eigen::MatrixXd relu_grad(const Eigen::MatrixXd& pre, const Eigen::MatrixXd& d) {
  return (pre.array() > 0.0).select(d, 0.0);
}

Eigen::MatrixXd affine(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w,
                       const Eigen::RowVectorXd& b) {
  Eigen::MatrixXd y(x.rows(), w.rows());
  y.noalias() = x * w.transpose();
  y.rowwise() += b;
  return y;
}

struct LayerNormOut {
  Eigen::MatrixXd hat;
  Eigen::VectorXd inv_std;
  Eigen::MatrixXd out;
};

LayerNormOut layer_norm(const Eigen::MatrixXd& a, const Eigen::RowVectorXd& gain,
                        const Eigen::RowVectorXd& bias) {
  LayerNormOut r;
  const Eigen::VectorXd mean = a.rowwise().mean();
  r.hat = a.colwise() - mean;
  const Eigen::VectorXd var = r.hat.array().square().rowwise().mean();
  r.inv_std = (var.array() + kLayerNormEps).rsqrt();
  r.hat = r.hat.array().colwise() * r.inv_std.array();
  r.out = r.hat.array().rowwise() * gain.array();
  r.out.rowwise() += bias;
  return r;
}

void check_snapshot(const ModelParams& p, const GraphSnapshot& s,
                    std::span<const std::uint8_t> mask) {
  if (s.node_features.cols() != p.dims.node_dim)
    throw SchemaError("node features have " +
                      std::to_string(s.node_features.cols()) +
                      " columns, model expects " + std::to_string(p.dims.node_dim));
  if (s.node_features.rows() != static_cast<Eigen::Index>(s.hosts.size()))
    throw SchemaError("node feature rows do not match host count");
  if (s.edge_features.cols() != p.dims.edge_dim ||
      s.edge_features.rows() != static_cast<Eigen::Index>(s.edges.size()))
    throw SchemaError("edge feature matrix shape does not match the edge list");
  if (mask.size() != s.edges.size())
    throw SchemaError("edge mask length does not match the edge list");
  const auto n = static_cast<int>(s.node_features.rows());
  for (const Edge& e : s.edges)
    if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n)
      throw DataError("edge index out of range");
}

// Message-passing forward shared by gine_layer and ForwardPass.
struct GineOut {
  Eigen::MatrixXd pre_msg;
  Eigen::MatrixXd u;
  Eigen::MatrixXd a1;
};

GineOut gine_aggregate(const Eigen::MatrixXd& h, std::span<const Edge> edges,
                       const Eigen::MatrixXd& edge_attr,
                       const GineLayerParams& layer, double epsilon) {
  GineOut r;
  r.pre_msg = affine(edge_attr, layer.edge_w, layer.edge_b);
  r.u = (1.0 + epsilon) * h;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto row = static_cast<Eigen::Index>(e);
    r.pre_msg.row(row) += h.row(edges[e].src);
    r.u.row(edges[e].dst) += r.pre_msg.row(row).cwiseMax(0.0);
  }
  r.a1 = affine(r.u, layer.mlp_w1, layer.mlp_b1);
  return r;
}

void fill_uniform(Eigen::MatrixXd& w, double bound, Rng& rng) {
  for (Eigen::Index i = 0; i < w.size(); ++i)
    w.data()[i] = uniform(rng, -bound, bound);
}

}  // namespace

// ---------------------------------------------------------------- params

ModelParams ModelParams::zeros(const ModelDims& d) {
  ModelParams p;
  p.dims = d;
  const int h = d.hidden;
  p.in_w = Eigen::MatrixXd::Zero(h, d.node_dim);
  p.in_b = Eigen::RowVectorXd::Zero(h);
  p.ln_gain = Eigen::RowVectorXd::Zero(h);
  p.ln_bias = Eigen::RowVectorXd::Zero(h);
  for (auto& l : p.layers) {
    l.edge_w = Eigen::MatrixXd::Zero(h, d.edge_dim);
    l.edge_b = Eigen::RowVectorXd::Zero(h);
    l.mlp_w1 = Eigen::MatrixXd::Zero(h, h);
    l.mlp_b1 = Eigen::RowVectorXd::Zero(h);
    l.mlp_w2 = Eigen::MatrixXd::Zero(h, h);
    l.mlp_b2 = Eigen::RowVectorXd::Zero(h);
  }
  p.fuse_w = Eigen::MatrixXd::Zero(h, 3 * h);
  p.fuse_b = Eigen::RowVectorXd::Zero(h);
  for (HeadParams* head : {&p.reg_head, &p.cls_head}) {
    const int out = head == &p.reg_head ? d.reg_dim : d.num_classes;
    head->w1 = Eigen::MatrixXd::Zero(h, d.repr_dim());
    head->b1 = Eigen::RowVectorXd::Zero(h);
    head->w2 = Eigen::MatrixXd::Zero(out, h);
    head->b2 = Eigen::RowVectorXd::Zero(out);
  }
  return p;
}

ModelParams ModelParams::initialize(const ModelDims& dims, std::uint64_t seed) {
  ModelParams p = zeros(dims);
  Rng rng(seed);
  auto init = [&](Eigen::MatrixXd& w) {
    fill_uniform(w, 1.0 / std::sqrt(static_cast<double>(w.cols())), rng);
  };
  init(p.in_w);
  p.ln_gain.setOnes();
  for (auto& l : p.layers) {
    init(l.edge_w);
    init(l.mlp_w1);
    init(l.mlp_w2);
  }
  init(p.fuse_w);
  for (HeadParams* head : {&p.reg_head, &p.cls_head}) {
    init(head->w1);
    init(head->w2);
  }
  return p;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each_parameter(*this, [&](std::string_view, const auto& a) {
    n += static_cast<std::size_t>(a.size());
  });
  return n;
}

bool ModelParams::all_finite() const {
  bool ok = true;
  for_each_parameter(*this, [&](std::string_view, const auto& a) {
    ok = ok && a.allFinite();
  });
  return ok;
}

// ---------------------------------------------------------------- stages

Eigen::MatrixXd input_projection(const ModelParams& params,
                                 const Eigen::MatrixXd& node_features) {
  if (node_features.cols() != params.dims.node_dim)
    throw SchemaError("input projection expects " +
                      std::to_string(params.dims.node_dim) + " columns");
  return relu(layer_norm(affine(node_features, params.in_w, params.in_b),
                         params.ln_gain, params.ln_bias)
                  .out);
}

Eigen::MatrixXd gine_layer(const Eigen::MatrixXd& h, std::span<const Edge> edges,
                           const Eigen::MatrixXd& edge_attr,
                           const GineLayerParams& layer, double epsilon) {
  const auto n = static_cast<int>(h.rows());
  for (const Edge& e : edges)
    if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n)
      throw DataError("edge index out of range");
  if (edge_attr.rows() != static_cast<Eigen::Index>(edges.size()))
    throw SchemaError("edge attribute rows do not match the edge list");
  const GineOut r = gine_aggregate(h, edges, edge_attr, layer, epsilon);
  return affine(relu(r.a1), layer.mlp_w2, layer.mlp_b2);
}

Eigen::MatrixXd fuse_levels(const ModelParams& params, const Eigen::MatrixXd& h0,
                            const Eigen::MatrixXd& h1, const Eigen::MatrixXd& h2) {
  if (h0.rows() != h1.rows() || h1.rows() != h2.rows())
    throw SchemaError("fusion inputs have different row counts");
  Eigen::MatrixXd c(h0.rows(), h0.cols() + h1.cols() + h2.cols());
  c << h0, h1, h2;
  return affine(c, params.fuse_w, params.fuse_b);
}

Eigen::RowVectorXd graph_summary(const Eigen::MatrixXd& z) {
  if (z.rows() == 0) return Eigen::RowVectorXd::Zero(z.cols());
  return z.colwise().mean();
}

Eigen::RowVectorXd edge_representation(const Eigen::RowVectorXd& z_i,
                                       const Eigen::RowVectorXd& z_j,
                                       const Eigen::RowVectorXd& edge_attr,
                                       const Eigen::RowVectorXd& g) {
  const Eigen::Index h = z_i.size();
  Eigen::RowVectorXd r(5 * h + edge_attr.size());
  r << z_i, z_j, edge_attr, (z_i - z_j).cwiseAbs(), z_i.cwiseProduct(z_j), g;
  return r;
}

DecodedEdge decode_edge(const ModelParams& params, const Eigen::RowVectorXd& r) {
  if (r.size() != params.dims.repr_dim())
    throw SchemaError("edge representation has the wrong width");
  auto head = [&](const HeadParams& hp) -> Eigen::RowVectorXd {
    const Eigen::RowVectorXd hidden = (r * hp.w1.transpose() + hp.b1).cwiseMax(0.0);
    return hidden * hp.w2.transpose() + hp.b2;
  };
  return {head(params.reg_head), head(params.cls_head)};
}

Eigen::MatrixXd masked_edge_attributes(const Eigen::MatrixXd& edge_features,
                                       std::span<const std::uint8_t> mask) {
  if (mask.size() != static_cast<std::size_t>(edge_features.rows()))
    throw SchemaError("edge mask length does not match the edge list");
  Eigen::MatrixXd out = edge_features;
  for (std::size_t e = 0; e < mask.size(); ++e)
    if (mask[e]) out.row(static_cast<Eigen::Index>(e)).setZero();
  return out;
}

EncodedSnapshot encode(const ModelParams& params, const GraphSnapshot& snapshot,
                       std::span<const std::uint8_t> mask) {
  const ForwardPass pass(params, snapshot, mask, {});
  EncodedSnapshot out;
  out.z = pass.z();
  out.g = pass.g();
  out.edge_attr = masked_edge_attributes(snapshot.edge_features, mask);
  return out;
}

Eigen::RowVectorXd softmax(const Eigen::RowVectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::RowVectorXd p = (logits.array() - m).exp();
  return p / p.sum();
}

// ---------------------------------------------------------------- forward

ForwardPass::ForwardPass(const ModelParams& params, const GraphSnapshot& snapshot,
                         std::span<const std::uint8_t> mask,
                         std::span<const std::size_t> decode_edges,
                         const ForwardOptions& options)
    : params_(params), snapshot_(snapshot), options_(options) {
  check_snapshot(params, snapshot, mask);
  dropout_active_ = options.training && params.dropout > 0.0;
  if (dropout_active_ && options.dropout_rng == nullptr)
    throw ConfigError("training-mode forward pass needs a dropout generator");

  const int h = params.dims.hidden;
  edge_attr_ = masked_edge_attributes(snapshot.edge_features, mask);

  const LayerNormOut ln = layer_norm(
      affine(snapshot.node_features, params.in_w, params.in_b), params.ln_gain,
      params.ln_bias);
  ln_hat_ = ln.hat;
  ln_inv_std_ = ln.inv_std;
  ln_out_ = ln.out;
  h0_ = relu(ln_out_);

  run_layer(0, h0_, h1_);
  run_layer(1, h1_, h2_);

  const Eigen::Index n = h0_.rows();
  fuse_in_.resize(n, 3 * h);
  fuse_in_ << h0_, h1_, h2_;
  if (dropout_active_) {
    fuse_mask_ = dropout_mask(n, 3 * h);
    fuse_in_ = fuse_in_.cwiseProduct(fuse_mask_);
  }
  z_ = affine(fuse_in_, params.fuse_w, params.fuse_b);
  g_ = graph_summary(z_);

  const auto k = static_cast<Eigen::Index>(decode_edges.size());
  repr_.resize(k, params.dims.repr_dim());
  out_.edge_ids.assign(decode_edges.begin(), decode_edges.end());
  for (Eigen::Index row = 0; row < k; ++row) {
    const std::size_t e = decode_edges[static_cast<std::size_t>(row)];
    if (e >= snapshot.edges.size())
      throw DataError("decode edge index out of range");
    const Edge& edge = snapshot.edges[e];
    repr_.row(row) = edge_representation(z_.row(edge.src), z_.row(edge.dst),
                                         edge_attr_.row(static_cast<Eigen::Index>(e)),
                                         g_);
  }
  out_.reg = run_head(params.reg_head, reg_cache_);
  out_.logits = run_head(params.cls_head, cls_cache_);
}

Eigen::MatrixXd ForwardPass::dropout_mask(Eigen::Index rows, Eigen::Index cols) {
  const double keep = 1.0 - params_.dropout;
  const double scale = 1.0 / keep;
  Eigen::MatrixXd m(rows, cols);
  Rng& rng = *options_.dropout_rng;
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = uniform01(rng) < keep ? scale : 0.0;
  return m;
}

void ForwardPass::run_layer(std::size_t l, const Eigen::MatrixXd& h_in,
                            Eigen::MatrixXd& h_out) {
  const GineLayerParams& p = params_.layers[l];
  LayerCache& c = layer_cache_[l];
  GineOut r = gine_aggregate(h_in, snapshot_.edges, edge_attr_, p, params_.epsilon);
  c.h_in = h_in;
  c.pre_msg = std::move(r.pre_msg);
  c.u = std::move(r.u);
  c.a1 = std::move(r.a1);
  c.q = relu(c.a1);
  if (dropout_active_) {
    c.q_mask = dropout_mask(c.q.rows(), c.q.cols());
    c.q = c.q.cwiseProduct(c.q_mask);
  }
  h_out = affine(c.q, p.mlp_w2, p.mlp_b2);
}

Eigen::MatrixXd ForwardPass::run_head(const HeadParams& head, HeadCache& cache) {
  cache.a = affine(repr_, head.w1, head.b1);
  cache.hidden = relu(cache.a);
  if (dropout_active_) {
    cache.mask = dropout_mask(cache.hidden.rows(), cache.hidden.cols());
    cache.hidden = cache.hidden.cwiseProduct(cache.mask);
  }
  return affine(cache.hidden, head.w2, head.b2);
}

// ---------------------------------------------------------------- backward

void ForwardPass::backward_head(const HeadParams& head, const HeadCache& cache,
                                const Eigen::MatrixXd& d_out, HeadParams& grad,
                                Eigen::MatrixXd& d_repr) const {
  grad.w2.noalias() = d_out.transpose() * cache.hidden;
  grad.b2 = d_out.colwise().sum();
  Eigen::MatrixXd d_hidden = d_out * head.w2;
  if (cache.mask.size() > 0) d_hidden = d_hidden.cwiseProduct(cache.mask);
  const Eigen::MatrixXd d_a = relu_grad(cache.a, d_hidden);
  grad.w1.noalias() = d_a.transpose() * repr_;
  grad.b1 = d_a.colwise().sum();
  d_repr.noalias() += d_a * head.w1;
}

void ForwardPass::backward_layer(std::size_t l, const Eigen::MatrixXd& d_out,
                                 GineLayerParams& grad, Eigen::MatrixXd& d_in) const {
  const GineLayerParams& p = params_.layers[l];
  const LayerCache& c = layer_cache_[l];

  grad.mlp_w2.noalias() = d_out.transpose() * c.q;
  grad.mlp_b2 = d_out.colwise().sum();
  Eigen::MatrixXd d_q = d_out * p.mlp_w2;
  if (c.q_mask.size() > 0) d_q = d_q.cwiseProduct(c.q_mask);
  const Eigen::MatrixXd d_a1 = relu_grad(c.a1, d_q);
  grad.mlp_w1.noalias() = d_a1.transpose() * c.u;
  grad.mlp_b1 = d_a1.colwise().sum();
  const Eigen::MatrixXd d_u = d_a1 * p.mlp_w1;

  d_in = (1.0 + params_.epsilon) * d_u;
  Eigen::MatrixXd d_pre(c.pre_msg.rows(), c.pre_msg.cols());
  for (std::size_t e = 0; e < snapshot_.edges.size(); ++e) {
    const auto row = static_cast<Eigen::Index>(e);
    const Edge& edge = snapshot_.edges[e];
    d_pre.row(row) =
        (c.pre_msg.row(row).array() > 0.0).select(d_u.row(edge.dst), 0.0);
    d_in.row(edge.src) += d_pre.row(row);
  }
  grad.edge_w.noalias() = d_pre.transpose() * edge_attr_;
  grad.edge_b = d_pre.colwise().sum();
}

ModelParams ForwardPass::backward(const Eigen::MatrixXd& d_reg,
                                  const Eigen::MatrixXd& d_logits) const {
  if (d_reg.rows() != out_.reg.rows() || d_reg.cols() != out_.reg.cols() ||
      d_logits.rows() != out_.logits.rows() ||
      d_logits.cols() != out_.logits.cols())
    throw SchemaError("output gradient shape does not match the predictions");

  const ModelDims& dims = params_.dims;
  const int h = dims.hidden;
  const int ed = dims.edge_dim;
  ModelParams grad = ModelParams::zeros(dims);
  grad.dropout = params_.dropout;
  grad.epsilon = params_.epsilon;

  Eigen::MatrixXd d_repr = Eigen::MatrixXd::Zero(repr_.rows(), repr_.cols());
  backward_head(params_.reg_head, reg_cache_, d_reg, grad.reg_head, d_repr);
  backward_head(params_.cls_head, cls_cache_, d_logits, grad.cls_head, d_repr);

  // Edge representation blocks back onto z.
  Eigen::MatrixXd d_z = Eigen::MatrixXd::Zero(z_.rows(), z_.cols());
  Eigen::RowVectorXd d_g = Eigen::RowVectorXd::Zero(h);
  const int abs_off = 2 * h + ed;
  const int prod_off = 3 * h + ed;
  const int g_off = 4 * h + ed;
  for (Eigen::Index k = 0; k < repr_.rows(); ++k) {
    const Edge& edge = snapshot_.edges[out_.edge_ids[static_cast<std::size_t>(k)]];
    const auto dr = d_repr.row(k);
    const Eigen::RowVectorXd zi = z_.row(edge.src);
    const Eigen::RowVectorXd zj = z_.row(edge.dst);
    const Eigen::RowVectorXd sign =
        (zi - zj).unaryExpr([](double v) { return double((v > 0.0) - (v < 0.0)); });
    const Eigen::RowVectorXd d_abs = sign.cwiseProduct(dr.segment(abs_off, h));
    const Eigen::RowVectorXd d_prod = dr.segment(prod_off, h);
    d_z.row(edge.src) += dr.segment(0, h) + d_abs + zj.cwiseProduct(d_prod);
    d_z.row(edge.dst) += dr.segment(h, h) - d_abs + zi.cwiseProduct(d_prod);
    d_g += dr.segment(g_off, h);
  }
  if (z_.rows() > 0) d_z.rowwise() += d_g / static_cast<double>(z_.rows());

  // Fusion.
  grad.fuse_w.noalias() = d_z.transpose() * fuse_in_;
  grad.fuse_b = d_z.colwise().sum();
  Eigen::MatrixXd d_c = d_z * params_.fuse_w;
  if (fuse_mask_.size() > 0) d_c = d_c.cwiseProduct(fuse_mask_);
  Eigen::MatrixXd d_h0 = d_c.leftCols(h);
  Eigen::MatrixXd d_h1 = d_c.middleCols(h, h);
  const Eigen::MatrixXd d_h2 = d_c.rightCols(h);

  Eigen::MatrixXd d_in;
  backward_layer(1, d_h2, grad.layers[1], d_in);
  d_h1 += d_in;
  backward_layer(0, d_h1, grad.layers[0], d_in);
  d_h0 += d_in;

  // Input projection: relu -> gain/bias -> layer norm -> affine.
  const Eigen::MatrixXd d_ln = relu_grad(ln_out_, d_h0);
  grad.ln_gain = d_ln.cwiseProduct(ln_hat_).colwise().sum();
  grad.ln_bias = d_ln.colwise().sum();
  const Eigen::MatrixXd d_hat = d_ln.array().rowwise() * params_.ln_gain.array();
  const Eigen::VectorXd mean_d = d_hat.rowwise().mean();
  const Eigen::VectorXd mean_dh = d_hat.cwiseProduct(ln_hat_).rowwise().mean();
  Eigen::MatrixXd d_a = d_hat.colwise() - mean_d;
  d_a -= (ln_hat_.array().colwise() * mean_dh.array()).matrix();
  d_a = d_a.array().colwise() * ln_inv_std_.array();
  grad.in_w.noalias() = d_a.transpose() * snapshot_.node_features;
  grad.in_b = d_a.colwise().sum();
  return grad;
}

EdgePredictions forward(const ModelParams& params, const GraphSnapshot& snapshot,
                        std::span<const std::uint8_t> mask) {
  std::vector<std::size_t> all(snapshot.edges.size());
  for (std::size_t e = 0; e < all.size(); ++e) all[e] = e;
  const ForwardPass pass(params, snapshot, mask, all);
  return pass.predictions();
}

}  // namespace edgesem
