#include "edgesem/pipeline.hpp"

#include <fstream>
#include <map>
#include <ostream>

#include "edgesem/checkpoint.hpp"
#include "edgesem/errors.hpp"
#include "edgesem/flow_ingest.hpp"
#include "edgesem/plots.hpp"
#include "edgesem/score_io.hpp"
#include "edgesem/snapshot_io.hpp"
#include "json_util.hpp"

namespace edgesem {

int run_guarded(const std::function<void()>& stage, std::ostream& err) {
  try {
    stage();
    return kExitOk;
  } catch (const MissingArtifactError& e) {
    err << "error: " << e.what() << '\n';
    return kExitMissingArtifact;
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << '\n';
    return kExitSchema;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  }
}

namespace {

namespace fs = std::filesystem;
using detail::json;

void say(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

fs::path artifact(const RunConfig& c, const char* name) { return c.out_dir / name; }

fs::path require(const RunConfig& c, const char* name, const char* producer) {
  fs::path p = artifact(c, name);
  if (!fs::exists(p)) throw MissingArtifactError(p.string(), producer);
  return p;
}

void ensure_out_dir(const RunConfig& c) {
  std::error_code ec;
  fs::create_directories(c.out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + c.out_dir.string() + "'");
}

void check_fingerprint(const std::string& found, const RunConfig& c, const std::string& what) {
  if (found != c.fingerprint())
    throw ConfigError(what + " was produced with config fingerprint " + found +
                      ", current config is " + c.fingerprint() +
                      "; rerun the producing stage");
}

SnapshotFile load_snapshots(const RunConfig& c) {
  SnapshotFile file = read_snapshot_file(require(c, artifacts::kSnapshots, "build-graphs"));
  if (file.feature_layout != c.feature_layout)
    throw ConfigError("feature layout version mismatch: snapshots use '" + file.feature_layout +
                      "', config expects '" + c.feature_layout + "'");
  check_fingerprint(file.fingerprint, c, artifacts::kSnapshots);
  return file;
}

std::vector<GraphSnapshot> select(const SnapshotFile& file,
                                  const std::vector<std::int64_t>& windows) {
  std::map<std::int64_t, const GraphSnapshot*> by_window;
  for (const auto& s : file.snapshots) by_window[s.window_index] = &s;
  std::vector<GraphSnapshot> out;
  out.reserve(windows.size());
  for (std::int64_t w : windows) {
    const auto it = by_window.find(w);
    if (it == by_window.end())
      throw SchemaError("split lists window " + std::to_string(w) + " that has no snapshot");
    out.push_back(*it->second);
  }
  return out;
}

Checkpoint load_checkpoint(const RunConfig& c) {
  Checkpoint ckpt = read_checkpoint(require(c, artifacts::kCheckpoint, "train"));
  if (ckpt.feature_layout != c.feature_layout)
    throw ConfigError("feature layout version mismatch between checkpoint and config");
  check_fingerprint(ckpt.fingerprint, c, artifacts::kCheckpoint);
  return ckpt;
}

Eigen::MatrixXd stack_rows(const std::vector<GraphSnapshot>& snaps) {
  Eigen::Index n = 0;
  for (const auto& s : snaps) n += s.node_features.rows();
  Eigen::MatrixXd out(n, kNodeFeatureDim);
  Eigen::Index r = 0;
  for (const auto& s : snaps) {
    out.middleRows(r, s.node_features.rows()) = s.node_features;
    r += s.node_features.rows();
  }
  return out;
}

json calibration_json(const CalibrationStats& s, const std::string& fingerprint) {
  return json{{"fingerprint", fingerprint}, {"med_reg", s.med_reg}, {"mad_reg", s.mad_reg},
              {"med_cls", s.med_cls},       {"mad_cls", s.mad_cls}, {"n_edges", s.n_edges}};
}

CalibrationStats read_calibration(const fs::path& path, const RunConfig& c) {
  const json j = detail::read_json_file(path);
  try {
    check_fingerprint(j.at("fingerprint").get<std::string>(), c, artifacts::kCalibration);
    CalibrationStats s;
    s.med_reg = j.at("med_reg").get<double>();
    s.mad_reg = j.at("mad_reg").get<double>();
    s.med_cls = j.at("med_cls").get<double>();
    s.mad_cls = j.at("mad_cls").get<double>();
    s.n_edges = j.at("n_edges").get<std::size_t>();
    return s;
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

}  // namespace

std::string evaluation_tag(const RunConfig& c) {
  return std::string(to_string(c.aggregation)) + (c.calibrated ? "" : "_raw");
}

fs::path run_synth_gen(const RunConfig& config, const Logger& log) {
  ensure_out_dir(config);
  SynthConfig sc = config.synth;
  sc.seed = config.seed;
  sc.window_seconds = config.window_seconds;
  const SynthResult result = generate_traffic(sc);
  const fs::path csv = artifact(config, artifacts::kSynthFlows);
  write_canonical_csv(csv, result.flows);
  write_manifest(artifact(config, artifacts::kSynthManifest), result.manifest);
  say(log, "synth-gen: " + std::to_string(result.flows.size()) + " flows, " +
               std::to_string(result.manifest.malicious_flow_ids.size()) + " malicious");
  return csv;
}

void run_ingest(const RunConfig& config, const Logger& log) {
  config.validate();
  if (config.input.empty()) throw ConfigError("no input flow file given (dataset.input / --input)");
  if (!fs::exists(config.input)) throw IoError("input '" + config.input.string() + "' not found");
  ensure_out_dir(config);
  const ParsedFlows parsed = parse_flow_csv(config.input, SchemaMap::preset(config.dataset_preset));
  if (parsed.records.empty()) throw DataError("no valid flow records in '" + config.input.string() + "'");
  write_canonical_csv(artifact(config, artifacts::kRecords), parsed.records);
  const IngestStats& s = parsed.stats;
  detail::write_json_file(artifact(config, artifacts::kIngestSummary),
                          json{{"fingerprint", config.fingerprint()},
                               {"preset", config.dataset_preset},
                               {"rows_read", s.rows_read},
                               {"accepted", s.accepted},
                               {"rejected_malformed", s.rejected_malformed},
                               {"rejected_nonfinite", s.rejected_nonfinite},
                               {"rejected_self_loop", s.rejected_self_loop}},
                          2);
  say(log, "ingest: " + std::to_string(s.accepted) + " of " + std::to_string(s.rows_read) +
               " rows accepted");
}

void run_build_graphs(const RunConfig& config, const Logger& log) {
  config.validate();
  const ParsedFlows parsed =
      parse_flow_csv(require(config, artifacts::kRecords, "ingest"), SchemaMap::canonical());
  const auto batches = partition_windows(parsed.records, config.window_seconds);
  NodeFeatureOptions opts;
  opts.rate = config.rate;
  opts.window_seconds = config.window_seconds;

  SnapshotFile file;
  file.feature_layout = config.feature_layout;
  file.fingerprint = config.fingerprint();
  file.snapshots = build_snapshots(batches, opts);
  const SplitIndices split = chronological_split(file.snapshots, config.train_fraction);
  for (std::size_t i : split.train) file.train_windows.push_back(file.snapshots[i].window_index);
  for (std::size_t i : split.test) file.test_windows.push_back(file.snapshots[i].window_index);
  write_snapshot_file(artifact(config, artifacts::kSnapshots), file);
  say(log, "build-graphs: " + std::to_string(file.snapshots.size()) + " snapshots (" +
               std::to_string(split.train.size()) + " train, " +
               std::to_string(split.test.size()) + " test)");
}

void run_train(const RunConfig& config, const Logger& log) {
  config.validate();
  const SnapshotFile file = load_snapshots(config);
  std::vector<GraphSnapshot> train_set = select(file, file.train_windows);
  const FeatureStats stats = fit_feature_stats(train_set, config.std_floor);
  for (auto& s : train_set) standardize(s, stats);

  TrainConfig tc = config.train;
  tc.seed = config.seed;
  std::ofstream history(artifact(config, artifacts::kHistory), std::ios::binary);
  if (!history) throw IoError("cannot write training history");
  history << json{{"fingerprint", config.fingerprint()}}.dump() << '\n';
  const TrainResult result =
      train(train_set, tc, config.dims, config.dropout, [&](const EpochRecord& r) {
        history << json{{"epoch", r.epoch},
                        {"train_loss", r.train.total},
                        {"train_reg", r.train.reg},
                        {"train_cls", r.train.cls},
                        {"val_loss", r.validation.total},
                        {"val_reg", r.validation.reg},
                        {"val_cls", r.validation.cls}}
                       .dump()
                << '\n';
        say(log, "train: epoch " + std::to_string(r.epoch) + " loss " +
                     std::to_string(r.train.total) + " val " + std::to_string(r.validation.total));
      });

  Checkpoint ckpt;
  ckpt.fingerprint = config.fingerprint();
  ckpt.feature_layout = config.feature_layout;
  ckpt.seed = config.seed;
  ckpt.params = result.params;
  ckpt.feature_stats = stats;
  write_checkpoint(artifact(config, artifacts::kCheckpoint), ckpt);
  say(log, "train: best epoch " + std::to_string(result.history.best_epoch) +
               (result.history.stopped_early ? " (early stop)" : ""));
}

void run_score(const RunConfig& config, const Logger& log) {
  config.validate();
  const SnapshotFile file = load_snapshots(config);
  const Checkpoint ckpt = load_checkpoint(config);
  std::vector<GraphSnapshot> train_set = select(file, file.train_windows);
  std::vector<GraphSnapshot> test_set = select(file, file.test_windows);
  for (auto& s : train_set) standardize(s, ckpt.feature_stats);
  for (auto& s : test_set) standardize(s, ckpt.feature_stats);
  const std::string fp = config.fingerprint();
  const double rho = config.train.mask_ratio;

  const CalibrationStats calib = fit_calibration(train_set, ckpt.params, rho, config.seed);
  detail::write_json_file(artifact(config, artifacts::kCalibration), calibration_json(calib, fp), 2);

  std::vector<EdgeScoreRow> edge_rows;
  for (const auto& s : test_set) {
    const RawEdgeScores raw =
        score_edges(s, ckpt.params, rho, snapshot_scoring_seed(config.seed, s.window_index));
    for (std::size_t e = 0; e < s.edges.size(); ++e)
      edge_rows.push_back({s.window_index, s.hosts[static_cast<std::size_t>(s.edges[e].src)],
                           s.hosts[static_cast<std::size_t>(s.edges[e].dst)], raw.s_reg[e],
                           raw.s_cls[e]});
  }
  write_edge_scores(artifact(config, artifacts::kEdgeScores), edge_rows, fp);
  say(log, "score: " + std::to_string(edge_rows.size()) + " test edges scored");

  // Baselines see the same standardized node features and split.
  const Eigen::MatrixXd train_rows = stack_rows(train_set);
  IsoForestConfig ifc = config.iforest;
  ifc.seed = derive_seed(config.seed, 21);
  const IsolationForest forest = IsolationForest::fit(train_rows, ifc);
  AutoencoderConfig aec = config.autoencoder;
  aec.seed = derive_seed(config.seed, 22);
  const Autoencoder ae = Autoencoder::fit(train_rows, aec);

  std::vector<HostScoreRow> rows;
  for (const auto& s : test_set) {
    const Eigen::VectorXd f = forest.score_rows(s.node_features);
    const Eigen::VectorXd a = ae.score_rows(s.node_features);
    for (std::size_t h = 0; h < s.hosts.size(); ++h) {
      rows.push_back({"iforest", s.window_index, s.hosts[h], f[static_cast<Eigen::Index>(h)]});
      rows.push_back({"autoencoder", s.window_index, s.hosts[h], a[static_cast<Eigen::Index>(h)]});
    }
  }
  write_host_scores(artifact(config, artifacts::kBaselineScores), rows, fp);
  say(log, "score: baselines done");
}

std::vector<EvaluationReport> run_evaluate(const RunConfig& config, const Logger& log) {
  config.validate();
  const SnapshotFile file = load_snapshots(config);
  const std::vector<GraphSnapshot> test_set = select(file, file.test_windows);
  const CalibrationStats calib =
      read_calibration(require(config, artifacts::kCalibration, "score"), config);
  const auto edges = read_edge_scores(require(config, artifacts::kEdgeScores, "score"));
  check_fingerprint(edges.fingerprint, config, artifacts::kEdgeScores);
  const auto baselines = read_host_scores(require(config, artifacts::kBaselineScores, "score"));
  check_fingerprint(baselines.fingerprint, config, artifacts::kBaselineScores);

  std::map<std::tuple<std::int64_t, std::string, std::string>, const EdgeScoreRow*> lookup;
  for (const auto& r : edges.rows) lookup[{r.window_index, r.src, r.dst}] = &r;

  std::vector<HostScoreRow> rows = baselines.rows;
  std::vector<HostScoreRow> model_rows;
  for (const auto& s : test_set) {
    RawEdgeScores raw;
    for (const Edge& e : s.edges) {
      const auto& src = s.hosts[static_cast<std::size_t>(e.src)];
      const auto& dst = s.hosts[static_cast<std::size_t>(e.dst)];
      const auto it = lookup.find({s.window_index, src, dst});
      if (it == lookup.end())
        throw DataError("edge " + src + "->" + dst + " of window " +
                        std::to_string(s.window_index) + " has no score");
      raw.s_reg.push_back(it->second->s_reg);
      raw.s_cls.push_back(it->second->s_cls);
    }
    const std::vector<double> scores =
        config.calibrated ? calibrate(raw, calib, config.scoring) : uncalibrated(raw, config.scoring);
    for (const HostScore& h : aggregate_hosts(s, scores, config.aggregation,
                                              config.scoring.lambda_src, config.scoring.lambda_dst))
      model_rows.push_back({kModelMethod, s.window_index, s.hosts[h.host], h.score});
  }
  rows.insert(rows.end(), model_rows.begin(), model_rows.end());

  const std::string tag = evaluation_tag(config);
  const std::string fp = config.fingerprint();
  write_host_scores(config.out_dir / ("host_scores_" + tag + ".csv"), model_rows, fp);

  std::vector<EvaluationReport> reports;
  for (const char* method : {kModelMethod, "iforest", "autoencoder"})
    reports.push_back(evaluate_run(test_set, rows, method, config.fpr_budgets));

  const ReportContext ctx{fp, to_string(config.aggregation), config.calibrated, config.seed};
  write_report_json(config.out_dir / ("report_" + tag + ".json"), reports, ctx);
  write_report_text(config.out_dir / ("report_" + tag + ".txt"), reports, ctx);

  if (config.plots) {
    std::vector<NamedCurve> roc;
    std::vector<NamedCurve> pr;
    for (const char* method : {kModelMethod, "iforest", "autoencoder"}) {
      const LabeledScores pooled = pool_instances(test_set, rows, method);
      if (std::string(method) == kModelMethod)
        write_histogram_svg(config.out_dir / ("hist_" + tag + ".svg"),
                            "host scores (" + tag + ")", pooled);
      roc.push_back({method, roc_curve(pooled.scores, pooled.labels)});
      pr.push_back({method, pr_curve(pooled.scores, pooled.labels)});
    }
    write_curve_svg(config.out_dir / ("roc_" + tag + ".svg"), "ROC (" + tag + ")",
                    "false positive rate", "true positive rate", roc);
    write_curve_svg(config.out_dir / ("pr_" + tag + ".svg"), "precision-recall (" + tag + ")",
                    "recall", "precision", pr);
  }

  for (const auto& r : reports) {
    std::string line = "evaluate: " + r.method + " roc_auc=" +
                       (r.roc_auc ? std::to_string(*r.roc_auc) : "undefined");
    for (const auto& t : r.tpr_at_fpr)
      line += " tpr@" + std::to_string(t.budget) + "=" + (t.tpr ? std::to_string(*t.tpr) : "undefined");
    say(log, line);
  }
  return reports;
}

std::vector<EvaluationReport> run_all(const RunConfig& config, const Logger& log) {
  config.validate();
  ensure_out_dir(config);
  {
    std::ofstream out(artifact(config, artifacts::kRunConfig), std::ios::binary);
    if (!out) throw IoError("cannot write run config");
    out << to_config_text(config);
  }
  run_ingest(config, log);
  run_build_graphs(config, log);
  run_train(config, log);
  run_score(config, log);
  return run_evaluate(config, log);
}

}  // namespace edgesem
