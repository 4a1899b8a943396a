#include "edgesem/checkpoint.hpp"

#include "json_util.hpp"

namespace edgesem {

using detail::json;

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const ModelDims& d = ckpt.params.dims;
  json params = json::array();
  for_each_parameter(ckpt.params, [&](std::string_view name, const auto& a) {
    json entry = detail::matrix_to_json(a);
    entry["name"] = std::string(name);
    params.push_back(std::move(entry));
  });
  const json doc{
      {"format_version", kCheckpointFormatVersion},
      {"fingerprint", ckpt.fingerprint},
      {"feature_layout", ckpt.feature_layout},
      {"seed", ckpt.seed},
      {"dims",
       {{"node_dim", d.node_dim},
        {"edge_dim", d.edge_dim},
        {"hidden", d.hidden},
        {"reg_dim", d.reg_dim},
        {"num_classes", d.num_classes}}},
      {"dropout", ckpt.params.dropout},
      {"epsilon", ckpt.params.epsilon},
      {"feature_stats",
       {{"mean", detail::matrix_to_json(ckpt.feature_stats.mean)},
        {"stddev", detail::matrix_to_json(ckpt.feature_stats.stddev)},
        {"floor", ckpt.feature_stats.floor}}},
      {"parameters", std::move(params)}};
  detail::write_json_file(path, doc);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  const json doc = detail::read_json_file(path);
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion)
      throw SchemaError(path.string() + ": unsupported checkpoint version " +
                        std::to_string(version));
    Checkpoint ckpt;
    ckpt.fingerprint = doc.at("fingerprint").get<std::string>();
    ckpt.feature_layout = doc.at("feature_layout").get<std::string>();
    ckpt.seed = doc.at("seed").get<std::uint64_t>();

    const json& jd = doc.at("dims");
    ModelDims dims;
    dims.node_dim = jd.at("node_dim").get<int>();
    dims.edge_dim = jd.at("edge_dim").get<int>();
    dims.hidden = jd.at("hidden").get<int>();
    dims.reg_dim = jd.at("reg_dim").get<int>();
    dims.num_classes = jd.at("num_classes").get<int>();
    if (dims.node_dim <= 0 || dims.edge_dim <= 0 || dims.hidden <= 0 ||
        dims.reg_dim <= 0 || dims.num_classes <= 0)
      throw SchemaError(path.string() + ": non-positive model dimension");

    ckpt.params = ModelParams::zeros(dims);
    ckpt.params.dropout = doc.at("dropout").get<double>();
    ckpt.params.epsilon = doc.at("epsilon").get<double>();

    const json& arrays = doc.at("parameters");
    std::size_t idx = 0;
    for_each_parameter(ckpt.params, [&](std::string_view name, auto& a) {
      if (idx >= arrays.size())
        throw SchemaError(path.string() + ": missing parameter " + std::string(name));
      const json& entry = arrays[idx++];
      if (entry.at("name").get<std::string>() != name)
        throw SchemaError(path.string() + ": expected parameter " +
                          std::string(name) + ", found " +
                          entry.at("name").get<std::string>());
      const Eigen::MatrixXd m = detail::matrix_from_json(entry);
      if (m.rows() != a.rows() || m.cols() != a.cols())
        throw SchemaError(path.string() + ": parameter " + std::string(name) +
                          " has shape " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()) + ", expected " +
                          std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
      a = m;
    });
    if (idx != arrays.size())
      throw SchemaError(path.string() + ": unexpected extra parameters");

    const json& fs = doc.at("feature_stats");
    ckpt.feature_stats.mean = detail::matrix_from_json(fs.at("mean"));
    ckpt.feature_stats.stddev = detail::matrix_from_json(fs.at("stddev"));
    ckpt.feature_stats.floor = fs.at("floor").get<double>();
    if (ckpt.feature_stats.mean.size() != dims.node_dim ||
        ckpt.feature_stats.stddev.size() != dims.node_dim)
      throw SchemaError(path.string() + ": feature statistics width mismatch");
    return ckpt;
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

}  // namespace edgesem
