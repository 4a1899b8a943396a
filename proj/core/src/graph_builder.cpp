#include "edgesem/graph_builder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>
#include <utility>

#include "edgesem/errors.hpp"

namespace edgesem {

const char* to_string(PortBucket b) {
  switch (b) {
    case PortBucket::web:
      return "web";
    case PortBucket::dns:
      return "dns";
    case PortBucket::other:
      return "other";
  }
  return "other";
}

PortBucket port_bucket(std::optional<std::uint16_t> dst_port) {
  if (!dst_port) return PortBucket::other;
  if (*dst_port == 80 || *dst_port == 443) return PortBucket::web;
  if (*dst_port == 53) return PortBucket::dns;
  return PortBucket::other;
}

AggregatedWindow aggregate_edges(const WindowBatch& batch) {
  AggregatedWindow out;
  std::unordered_map<std::string, int> host_index;
  auto index_of = [&](const std::string& host) {
    const auto [it, inserted] =
        host_index.emplace(host, static_cast<int>(out.hosts.size()));
    if (inserted) out.hosts.push_back(host);
    return it->second;
  };

  std::map<std::pair<int, int>, std::size_t> edge_index;
  for (const FlowRecord& r : batch.records) {
    const int src = index_of(r.src_host);
    const int dst = index_of(r.dst_host);
    const auto [it, inserted] =
        edge_index.emplace(std::make_pair(src, dst), out.edges.size());
    if (inserted) {
      EdgeAggregate agg;
      agg.src = src;
      agg.dst = dst;
      out.edges.push_back(agg);
    }
    EdgeAggregate& agg = out.edges[it->second];
    const auto b = static_cast<std::size_t>(port_bucket(r.dst_port));
    agg.flow_count += 1.0;
    agg.bytes += r.bytes;
    agg.packets += r.packets;
    agg.duration += r.duration;
    agg.bucket_flows[b] += 1.0;
    agg.bucket_bytes[b] += r.bytes;
  }
  return out;
}

PortBucket dominant_bucket(const EdgeAggregate& agg) {
  std::size_t best = 0;
  for (std::size_t b = 1; b < kNumBuckets; ++b) {
    const bool more_flows = agg.bucket_flows[b] > agg.bucket_flows[best];
    const bool tie_more_bytes = agg.bucket_flows[b] == agg.bucket_flows[best] &&
                                agg.bucket_bytes[b] > agg.bucket_bytes[best];
    if (more_flows || tie_more_bytes) best = b;
  }
  return static_cast<PortBucket>(best);
}

namespace {

double safe_div(double num, double den) { return den > 0.0 ? num / den : 0.0; }

double share(double out, double in) {
  const double total = out + in;
  return total > 0.0 ? out / total : 0.5;
}

}  // namespace

EdgeFeatures compute_edge_features(const EdgeAggregate& agg) {
  EdgeFeatures f;
  f.bucket = dominant_bucket(agg);
  auto& x = f.features;
  x[0] = std::log1p(agg.flow_count);
  x[1] = std::log1p(agg.bytes);
  x[2] = std::log1p(agg.packets);
  x[3 + static_cast<std::size_t>(f.bucket)] = 1.0;
  x[6] = std::log1p(safe_div(agg.bytes, agg.flow_count));
  x[7] = std::log1p(safe_div(agg.packets, agg.flow_count));
  x[8] = std::log1p(agg.bytes / std::max(agg.packets, 1.0));
  f.reg_target = {x[0], x[1], x[2]};
  return f;
}

namespace {

struct DirectionTotals {
  double flows = 0.0;
  double bytes = 0.0;
  double packets = 0.0;
  double duration = 0.0;
  double degree = 0.0;
};

struct HostTotals {
  DirectionTotals out;
  DirectionTotals in;
  std::set<int> out_neighbors;
  std::set<int> in_neighbors;
  std::array<double, kNumBuckets> out_bucket_flows{};
};

// Twelve per-direction statistics starting at column `c`.
void write_direction(Eigen::Ref<Eigen::RowVectorXd> row, int c,
                     const DirectionTotals& d, const NodeFeatureOptions& opt) {
  const double rate_den = opt.rate == RateDenominator::flow_duration
                              ? d.duration
                              : opt.window_seconds;
  row[c + 0] = std::log1p(d.flows);
  row[c + 1] = std::log1p(d.bytes);
  row[c + 2] = std::log1p(d.packets);
  row[c + 3] = std::log1p(d.duration);
  row[c + 4] = safe_div(d.duration, d.flows);
  row[c + 5] = std::log1p(safe_div(d.bytes, rate_den));
  row[c + 6] = std::log1p(safe_div(d.packets, rate_den));
  row[c + 7] = std::log1p(safe_div(d.bytes, d.flows));
  row[c + 8] = std::log1p(safe_div(d.packets, d.flows));
  row[c + 9] = std::log1p(d.degree);
  row[c + 10] = std::log1p(safe_div(d.bytes, d.degree));
  row[c + 11] = std::log1p(safe_div(d.packets, d.degree));
}

}  // namespace

Eigen::MatrixXd compute_node_features(std::size_t n_hosts,
                                      std::span<const EdgeAggregate> edges,
                                      const NodeFeatureOptions& options) {
  if (options.rate == RateDenominator::window_length &&
      !(options.window_seconds > 0.0))
    throw ConfigError("window-length rates need a positive window_seconds");

  std::vector<HostTotals> totals(n_hosts);
  for (const EdgeAggregate& e : edges) {
    if (e.src < 0 || e.dst < 0 || static_cast<std::size_t>(e.src) >= n_hosts ||
        static_cast<std::size_t>(e.dst) >= n_hosts)
      throw DataError("edge aggregate references a host outside the window");
    HostTotals& s = totals[static_cast<std::size_t>(e.src)];
    HostTotals& d = totals[static_cast<std::size_t>(e.dst)];
    s.out.flows += e.flow_count;
    s.out.bytes += e.bytes;
    s.out.packets += e.packets;
    s.out.duration += e.duration;
    s.out.degree += 1.0;
    s.out_neighbors.insert(e.dst);
    for (std::size_t b = 0; b < kNumBuckets; ++b)
      s.out_bucket_flows[b] += e.bucket_flows[b];
    d.in.flows += e.flow_count;
    d.in.bytes += e.bytes;
    d.in.packets += e.packets;
    d.in.duration += e.duration;
    d.in.degree += 1.0;
    d.in_neighbors.insert(e.src);
  }

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_hosts),
                                            kNodeFeatureDim);
  for (std::size_t h = 0; h < n_hosts; ++h) {
    const HostTotals& t = totals[h];
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(kNodeFeatureDim);
    write_direction(row, 0, t.out, options);
    write_direction(row, 12, t.in, options);

    const double flows = t.out.flows + t.in.flows;
    const double bytes = t.out.bytes + t.in.bytes;
    const double packets = t.out.packets + t.in.packets;
    const double degree = t.out.degree + t.in.degree;
    row[24] = std::log1p(flows);
    row[25] = std::log1p(bytes);
    row[26] = std::log1p(packets);
    row[27] = std::log1p(t.out.duration + t.in.duration);
    row[28] = std::log1p(degree);
    row[29] = std::log1p(safe_div(bytes, degree));
    row[30] = std::log1p(safe_div(packets, degree));
    row[31] = std::log1p(safe_div(flows, degree));

    std::set<int> all = t.out_neighbors;
    all.insert(t.in_neighbors.begin(), t.in_neighbors.end());
    const double n_out = static_cast<double>(t.out_neighbors.size());
    const double n_in = static_cast<double>(t.in_neighbors.size());
    const double n_all = static_cast<double>(all.size());
    row[32] = std::log1p(n_out);
    row[33] = std::log1p(n_in);
    row[34] = std::log1p(n_all);
    row[35] = std::log1p(safe_div(t.out.flows, n_out));
    row[36] = std::log1p(safe_div(t.in.flows, n_in));
    row[37] = std::log1p(safe_div(flows, n_all));
    row[38] = share(t.out.bytes, t.in.bytes);
    row[39] = share(t.out.packets, t.in.packets);
    row[40] = share(t.out.flows, t.in.flows);
    row[41] = std::log1p(safe_div(t.out.bytes, n_out));
    row[42] = std::log1p(safe_div(t.out.packets, n_out));
    row[43] = std::log1p(safe_div(t.in.bytes, n_in));
    row[44] = std::log1p(safe_div(t.in.packets, n_in));
    row[45] = std::log1p(safe_div(t.out.bytes, t.out.packets));
    row[46] = std::log1p(safe_div(t.in.bytes, t.in.packets));
    row[47] = std::log1p(safe_div(bytes, packets));
    for (std::size_t b = 0; b < kNumBuckets; ++b)
      row[48 + static_cast<int>(b)] = safe_div(t.out_bucket_flows[b], t.out.flows);

    x.row(static_cast<Eigen::Index>(h)) = row;
  }
  return x;
}

NodeLabels assign_labels(const WindowBatch& batch,
                         std::span<const std::string> hosts) {
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < hosts.size(); ++i) index.emplace(hosts[i], i);

  NodeLabels out;
  out.node_labels.assign(hosts.size(), 0);
  for (const FlowRecord& r : batch.records) {
    const auto src = index.find(r.src_host);
    if (src == index.end() || index.find(r.dst_host) == index.end())
      throw DataError("snapshot host list does not cover flow endpoints");
    if (r.malicious) {
      out.node_labels[src->second] = 1;
      out.graph_label = true;
    }
  }
  return out;
}

GraphSnapshot build_snapshot(const WindowBatch& batch,
                             const NodeFeatureOptions& options) {
  if (batch.records.empty())
    throw DataError("cannot build a snapshot from an empty window");

  AggregatedWindow agg = aggregate_edges(batch);
  GraphSnapshot s;
  s.window_index = batch.window_index;
  s.t_start = batch.t_start;
  s.t_end = batch.t_end;
  s.flow_count = batch.records.size();
  s.hosts = std::move(agg.hosts);

  const auto n_edges = static_cast<Eigen::Index>(agg.edges.size());
  s.edges.reserve(agg.edges.size());
  s.edge_features.resize(n_edges, kEdgeFeatureDim);
  s.edge_targets_reg.resize(n_edges, kRegTargetDim);
  s.edge_targets_cls.reserve(agg.edges.size());
  for (Eigen::Index e = 0; e < n_edges; ++e) {
    const EdgeAggregate& a = agg.edges[static_cast<std::size_t>(e)];
    const EdgeFeatures f = compute_edge_features(a);
    s.edges.push_back({a.src, a.dst});
    for (int k = 0; k < kEdgeFeatureDim; ++k)
      s.edge_features(e, k) = f.features[static_cast<std::size_t>(k)];
    for (int k = 0; k < kRegTargetDim; ++k)
      s.edge_targets_reg(e, k) = f.reg_target[static_cast<std::size_t>(k)];
    s.edge_targets_cls.push_back(f.bucket);
  }

  NodeFeatureOptions opt = options;
  if (opt.rate == RateDenominator::window_length && !(opt.window_seconds > 0.0))
    opt.window_seconds = batch.t_end - batch.t_start;
  s.node_features = compute_node_features(s.hosts.size(), agg.edges, opt);

  NodeLabels labels = assign_labels(batch, s.hosts);
  s.node_labels = std::move(labels.node_labels);
  s.graph_label = labels.graph_label;
  return s;
}

std::vector<GraphSnapshot> build_snapshots(std::span<const WindowBatch> batches,
                                           const NodeFeatureOptions& options) {
  std::vector<GraphSnapshot> out;
  out.reserve(batches.size());
  for (const WindowBatch& b : batches) out.push_back(build_snapshot(b, options));
  return out;
}

FeatureStats fit_feature_stats(const std::vector<const GraphSnapshot*>& train,
                               double std_floor) {
  if (train.empty())
    throw ConfigError("feature statistics need at least one training snapshot");
  if (!(std_floor > 0.0)) throw ConfigError("std floor must be positive");

  const Eigen::Index dim = train.front()->node_features.cols();
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(dim);
  double rows = 0.0;
  for (const GraphSnapshot* s : train) {
    if (s->node_features.cols() != dim)
      throw SchemaError("node feature width differs between snapshots");
    sum += s->node_features.colwise().sum();
    rows += static_cast<double>(s->node_features.rows());
  }
  if (rows == 0.0) throw DataError("training snapshots contain no hosts");

  FeatureStats stats;
  stats.floor = std_floor;
  stats.mean = sum / rows;
  Eigen::RowVectorXd sq = Eigen::RowVectorXd::Zero(dim);
  for (const GraphSnapshot* s : train)
    sq += (s->node_features.rowwise() - stats.mean).array().square().matrix()
              .colwise().sum();
  stats.stddev = (sq / rows).array().sqrt().max(std_floor).matrix();
  return stats;
}

FeatureStats fit_feature_stats(std::span<const GraphSnapshot> train,
                               double std_floor) {
  std::vector<const GraphSnapshot*> ptrs;
  ptrs.reserve(train.size());
  for (const GraphSnapshot& s : train) ptrs.push_back(&s);
  return fit_feature_stats(ptrs, std_floor);
}

Eigen::MatrixXd standardize_rows(const Eigen::MatrixXd& rows,
                                 const FeatureStats& stats) {
  if (rows.cols() != stats.mean.size())
    throw SchemaError("feature statistics width does not match node features");
  return ((rows.rowwise() - stats.mean).array().rowwise() /
          stats.stddev.array())
      .matrix();
}

void standardize(GraphSnapshot& snapshot, const FeatureStats& stats) {
  snapshot.node_features = standardize_rows(snapshot.node_features, stats);
}

SplitIndices chronological_split(std::span<const GraphSnapshot> snapshots,
                                 double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train fraction must lie in (0, 1)");

  std::vector<std::size_t> order(snapshots.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return snapshots[a].window_index < snapshots[b].window_index;
  });

  std::vector<std::size_t> benign;
  for (std::size_t i : order)
    if (!snapshots[i].graph_label) benign.push_back(i);
  if (benign.empty())
    throw DataError("no benign snapshots: nothing to train on");

  // Small epsilon so that e.g. 0.7 * 10 lands on 7, not 7.000000000000001.
  const auto n_train = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(benign.size()) + 1e-9));
  if (n_train == 0)
    throw DataError("degenerate split: floor(" + std::to_string(train_fraction) +
                    " * " + std::to_string(benign.size()) +
                    ") benign snapshots leaves the training pool empty");

  SplitIndices split;
  split.train.assign(benign.begin(), benign.begin() + static_cast<long>(n_train));
  std::set<std::size_t> train_set(split.train.begin(), split.train.end());
  for (std::size_t i : order)
    if (!train_set.count(i)) split.test.push_back(i);
  return split;
}

}  // namespace edgesem
