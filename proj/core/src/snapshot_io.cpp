#include "edgesem/snapshot_io.hpp"

#include "json_util.hpp"

namespace edgesem {

using detail::json;

namespace {

PortBucket bucket_from_string(const std::string& s) {
  if (s == "web") return PortBucket::web;
  if (s == "dns") return PortBucket::dns;
  if (s == "other") return PortBucket::other;
  throw SchemaError("unknown port bucket '" + s + "'");
}

json snapshot_to_json(const GraphSnapshot& s) {
  json edges = json::array();
  for (const Edge& e : s.edges) edges.push_back({e.src, e.dst});
  json cls = json::array();
  for (PortBucket b : s.edge_targets_cls) cls.push_back(to_string(b));
  return json{{"window_index", s.window_index},
              {"t_start", s.t_start},
              {"t_end", s.t_end},
              {"flow_count", s.flow_count},
              {"hosts", s.hosts},
              {"edges", std::move(edges)},
              {"node_features", detail::matrix_to_json(s.node_features)},
              {"edge_features", detail::matrix_to_json(s.edge_features)},
              {"edge_targets_reg", detail::matrix_to_json(s.edge_targets_reg)},
              {"edge_targets_cls", std::move(cls)},
              {"node_labels", s.node_labels},
              {"graph_label", s.graph_label}};
}

GraphSnapshot snapshot_from_json(const json& j) {
  GraphSnapshot s;
  s.window_index = j.at("window_index").get<std::int64_t>();
  s.t_start = j.at("t_start").get<double>();
  s.t_end = j.at("t_end").get<double>();
  s.flow_count = j.at("flow_count").get<std::size_t>();
  s.hosts = j.at("hosts").get<std::vector<std::string>>();
  const auto n = static_cast<int>(s.hosts.size());
  for (const json& e : j.at("edges")) {
    Edge edge{e.at(0).get<int>(), e.at(1).get<int>()};
    if (edge.src < 0 || edge.src >= n || edge.dst < 0 || edge.dst >= n)
      throw SchemaError("edge index out of range in snapshot " +
                        std::to_string(s.window_index));
    s.edges.push_back(edge);
  }
  s.node_features = detail::matrix_from_json(j.at("node_features"));
  s.edge_features = detail::matrix_from_json(j.at("edge_features"));
  s.edge_targets_reg = detail::matrix_from_json(j.at("edge_targets_reg"));
  for (const json& b : j.at("edge_targets_cls"))
    s.edge_targets_cls.push_back(bucket_from_string(b.get<std::string>()));
  s.node_labels = j.at("node_labels").get<std::vector<std::uint8_t>>();
  s.graph_label = j.at("graph_label").get<bool>();

  const auto ne = static_cast<Eigen::Index>(s.edges.size());
  if (s.node_features.rows() != n || s.edge_features.rows() != ne ||
      s.edge_targets_reg.rows() != ne ||
      s.edge_targets_cls.size() != s.edges.size() ||
      s.node_labels.size() != s.hosts.size())
    throw SchemaError("inconsistent array lengths in snapshot " +
                      std::to_string(s.window_index));
  return s;
}

}  // namespace

void write_snapshot_file(const std::filesystem::path& path,
                         const SnapshotFile& file) {
  json snaps = json::array();
  for (const GraphSnapshot& s : file.snapshots) snaps.push_back(snapshot_to_json(s));
  const json doc{{"format_version", file.format_version},
                 {"feature_layout", file.feature_layout},
                 {"fingerprint", file.fingerprint},
                 {"train_windows", file.train_windows},
                 {"test_windows", file.test_windows},
                 {"snapshots", std::move(snaps)}};
  detail::write_json_file(path, doc);
}

SnapshotFile read_snapshot_file(const std::filesystem::path& path) {
  const json doc = detail::read_json_file(path);
  try {
    SnapshotFile f;
    f.format_version = doc.at("format_version").get<int>();
    if (f.format_version != kSnapshotFormatVersion)
      throw SchemaError(path.string() + ": unsupported snapshot format version " +
                        std::to_string(f.format_version));
    f.feature_layout = doc.at("feature_layout").get<std::string>();
    f.fingerprint = doc.at("fingerprint").get<std::string>();
    f.train_windows = doc.at("train_windows").get<std::vector<std::int64_t>>();
    f.test_windows = doc.at("test_windows").get<std::vector<std::int64_t>>();
    for (const json& s : doc.at("snapshots"))
      f.snapshots.push_back(snapshot_from_json(s));
    return f;
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

}  // namespace edgesem
