// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero if any gating criterion (1-9) fails. Criterion 10 is optional and
// only runs when EDGESEM_CICIDS2017_CSV points at a CICIDS2017 flow CSV.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "edgesem/metrics.hpp"
#include "edgesem/model.hpp"
#include "edgesem/pipeline.hpp"
#include "edgesem/scoring.hpp"
#include "edgesem/synth.hpp"
#include "edgesem/trainer.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace edgesem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---------------------------------------------------------------- 1

std::optional<double> oracle_auc(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  double pairs = 0.0;
  std::uint64_t twice = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!y[i] || y[j]) continue;
      pairs += 1.0;
      if (s[i] > s[j]) twice += 2;
      else if (s[i] == s[j]) twice += 1;
    }
  if (pairs == 0.0) return std::nullopt;
  return static_cast<double>(twice) / (2.0 * pairs);
}

std::optional<double> oracle_ap(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  std::vector<double> thresholds(s.begin(), s.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  std::uint64_t P = 0;
  for (auto l : y) P += l;
  if (P == 0) return std::nullopt;
  double ap = 0.0;
  for (double t : thresholds) {
    std::uint64_t tp = 0, fp = 0, at = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= t) (y[i] ? tp : fp) += 1;
      if (s[i] == t && y[i]) ++at;
    }
    if (at == 0) continue;
    ap += static_cast<double>(at) / static_cast<double>(P) *
          (static_cast<double>(tp) / static_cast<double>(tp + fp));
  }
  return ap;
}

std::optional<double> oracle_tpr(const std::vector<double>& s, const std::vector<std::uint8_t>& y,
                                 double budget) {
  std::uint64_t P = 0, N = 0;
  for (auto l : y) (l ? P : N) += 1;
  if (P == 0 || N == 0) return std::nullopt;
  std::vector<double> thresholds(s.begin(), s.end());
  thresholds.push_back(std::numeric_limits<double>::infinity());
  double best = 0.0;
  for (double t : thresholds) {
    std::uint64_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] >= t) (y[i] ? tp : fp) += 1;
    if (static_cast<double>(fp) / static_cast<double>(N) <= budget)
      best = std::max(best, static_cast<double>(tp) / static_cast<double>(P));
  }
  return best;
}

Outcome criterion1() {
  Rng rng(20240601);
  int mismatches = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 12);
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    const std::size_t levels = 1 + uniform_index(rng, 6);  // few levels force ties
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(uniform_index(rng, levels)) / 4.0;
      y[i] = static_cast<std::uint8_t>(uniform01(rng) < 0.4);
    }
    if (roc_auc(s, y) != oracle_auc(s, y)) ++mismatches;
    if (average_precision(s, y) != oracle_ap(s, y)) ++mismatches;
    for (double b : {0.0, 0.01, 0.05, 0.2, 0.5, 1.0})
      if (tpr_at_fpr(s, y, b) != oracle_tpr(s, y, b)) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches over 500 inputs x 8 metric calls"};
}

// ---------------------------------------------------------------- 2

Outcome criterion2() {
  const GraphSnapshot snap = test_support::toy_snapshot(8);
  const ModelParams params = test_support::generic_params(99);
  Rng rng(5);
  const std::vector<std::size_t> mask = sample_mask(snap.num_edges(), 0.5, rng);
  const GradientCheckResult good = gradient_check(params, snap, mask);

  GradientCheckOptions bad_opts;
  bad_opts.corrupt = [](ModelParams& g) { g.cls_head.w2 *= 1.05; };
  const GradientCheckResult bad = gradient_check(params, snap, mask, {}, bad_opts);

  const bool pass = snap.num_nodes() == 8 && good.groups == 26 && good.coordinates >= 50 &&
                    good.max_relative_error <= 1e-4 && bad.max_relative_error >= 1e-2;
  return {pass, "max rel err " + fmt(good.max_relative_error) + " over " +
                    std::to_string(good.coordinates) + " coords / " + std::to_string(good.groups) +
                    " arrays (worst " + good.worst_parameter + "); corrupted cls.w2 grad -> " +
                    fmt(bad.max_relative_error)};
}

// ---------------------------------------------------------------- 3

Outcome criterion3() {
  int failures = 0;
  const ModelParams params = ModelParams::initialize({}, 3);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GraphSnapshot snap = test_support::toy_snapshot(100 + seed, 10, 30);
    Rng rng(seed);
    const auto mask = sample_mask(snap.num_edges(), 0.3, rng);
    const auto flags = mask_flags(snap.num_edges(), mask);

    // (a) loss ignores unmasked targets
    const EdgePredictions pred = forward(params, snap, flags);
    const LossBreakdown before =
        masked_losses(pred.reg, pred.logits, snap.edge_targets_reg, snap.edge_targets_cls, mask, {});
    GraphSnapshot altered = snap;
    for (std::size_t e = 0; e < snap.num_edges(); ++e) {
      if (flags[e]) continue;
      altered.edge_targets_reg.row(static_cast<Eigen::Index>(e)).array() += 100.0 * uniform01(rng);
      altered.edge_targets_cls[e] = static_cast<PortBucket>((static_cast<int>(snap.edge_targets_cls[e]) + 1) % 3);
    }
    const LossBreakdown after = masked_losses(pred.reg, pred.logits, altered.edge_targets_reg,
                                              altered.edge_targets_cls, mask, {});
    if (before.total != after.total || before.reg != after.reg || before.cls != after.cls) ++failures;

    // (b) outputs ignore masked attributes
    GraphSnapshot perturbed = snap;
    for (std::size_t e : mask)
      for (int k = 0; k < kEdgeFeatureDim; ++k)
        perturbed.edge_features(static_cast<Eigen::Index>(e), k) += 10.0 * standard_normal(rng);
    const EdgePredictions pred2 = forward(params, perturbed, flags);
    if (pred.reg != pred2.reg || pred.logits != pred2.logits) ++failures;
  }

  // (c) every edge masked exactly once by the inference partition
  Rng rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = uniform_index(rng, 400);
    const double rho = uniform(rng, 0.05, 0.95);
    const auto groups = inference_partition(n, rho, rng());
    std::vector<int> hits(n, 0);
    for (const auto& g : groups)
      for (std::size_t e : g) ++hits[e];
    if (groups.size() != partition_group_count(rho) ||
        groups.size() != static_cast<std::size_t>(std::ceil(1.0 / rho - 1e-9)))
      ++failures;
    for (int h : hits)
      if (h != 1) ++failures;
  }
  return {failures == 0, std::to_string(failures) + " violations (20 snapshots for a/b, 300 partitions for c)"};
}

// ---------------------------------------------------------------- 4

Outcome criterion4() {
  const ScoringConstants c;
  bool ok = true;
  std::string detail;

  // clip bound on adversarial raw scores
  Rng rng(4);
  CalibrationStats stats{0.3, 0.05, 0.01, 0.0, 0};
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double s = std::exp(uniform(rng, -20.0, 20.0)) * (uniform01(rng) < 0.5 ? -1.0 : 1.0);
    worst = std::max({worst, std::abs(robust_z(s, stats.med_reg, stats.mad_reg, c)),
                      std::abs(robust_z(s, stats.med_cls, stats.mad_cls, c))});
  }
  ok = ok && worst <= c.tau_clip;
  detail += "max |z| " + fmt(worst);

  // median of benign-train z_reg is zero: untrained model over toy snapshots
  std::vector<GraphSnapshot> train;
  for (std::uint64_t s = 0; s < 6; ++s) train.push_back(test_support::toy_snapshot(500 + s, 9, 30));
  const ModelParams params = ModelParams::initialize({}, 17);
  const CalibrationStats fit = fit_calibration(train, params, 0.2, 42);
  std::vector<double> z;
  for (const auto& snap : train) {
    const RawEdgeScores raw = score_edges(snap, params, 0.2, snapshot_scoring_seed(42, snap.window_index));
    for (double s : raw.s_reg) z.push_back(robust_z(s, fit.med_reg, fit.mad_reg, c));
  }
  const double med_z = median(z);
  ok = ok && std::abs(med_z) <= 1e-9;
  detail += ", median z_reg " + fmt(med_z) + " over " + std::to_string(z.size()) + " edges";

  // worked example
  const std::vector<double> pool = {1, 2, 3, 4, 5};
  const double med = median(pool);
  const double mad = median_absolute_deviation(pool);
  const double z100 = robust_z(100.0, med, mad, c);
  ok = ok && med == 3.0 && mad == 1.0 && z100 == 10.0;
  detail += ", worked example med=" + fmt(med) + " mad=" + fmt(mad) + " z(100)=" + fmt(z100);
  return {ok, detail};
}

// ---------------------------------------------------------------- 5

Outcome criterion5() {
  Rng rng(5);
  int violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n_out = uniform_index(rng, 8);
    const std::size_t n_in = (n_out == 0 ? 1 : 0) + uniform_index(rng, 8);
    const double ls = uniform(rng, 0.0, 2.0);
    const double ld = uniform(rng, 0.0, 2.0);
    std::vector<double> v;
    for (std::size_t i = 0; i < n_out; ++i) v.push_back(ls * uniform(rng, -20.0, 20.0));
    for (std::size_t i = 0; i < n_in; ++i) v.push_back(ld * uniform(rng, -20.0, 20.0));
    const double mean = aggregate(v, AggregationOp::mean);
    const double max = aggregate(v, AggregationOp::max);
    const double q90 = aggregate(v, AggregationOp::q90);
    const double topk = aggregate(v, AggregationOp::topk_mean);
    if (!(max >= q90 && max >= mean && max >= topk && topk >= mean - 1e-12)) ++violations;
  }

  // worked example through aggregate_hosts: A->B 2, A->C 4, D->A 10
  GraphSnapshot snap;
  snap.hosts = {"A", "B", "C", "D"};
  snap.edges = {{0, 1}, {0, 2}, {3, 0}};
  const std::vector<double> scores = {2.0, 4.0, 10.0};
  const ScoringConstants c;
  auto host_a = [&](AggregationOp op) {
    return aggregate_hosts(snap, scores, op, c.lambda_src, c.lambda_dst).front();
  };
  const double mean = host_a(AggregationOp::mean).score;
  const double max = host_a(AggregationOp::max).score;
  const double q90 = host_a(AggregationOp::q90).score;
  const double topk = host_a(AggregationOp::topk_mean).score;
  const bool example = host_a(AggregationOp::mean).incident == 3 && std::abs(mean - 8.0 / 3.0) <= 1e-12 &&
                       max == 4.0 && std::abs(q90 - 3.6) <= 1e-12 && topk == 4.0;
  return {violations == 0 && example,
          std::to_string(violations) + " dominance violations / 1000; {2,2,4}: mean " + fmt(mean) +
              " max " + fmt(max) + " q90 " + fmt(q90) + " topk " + fmt(topk)};
}

// ---------------------------------------------------------------- 6

Outcome criterion6() {
  Rng rng(6);
  double worst_conservation = 0.0;
  double worst_snapshot = 0.0;
  double worst_encoder = 0.0;
  bool structure_ok = true;
  const ModelParams params = ModelParams::initialize({}, 66);

  for (int trial = 0; trial < 100; ++trial) {
    const int n_hosts = 2 + static_cast<int>(uniform_index(rng, 15));
    const int n_flows = 1 + static_cast<int>(uniform_index(rng, 120));
    WindowBatch batch;
    batch.t_end = 30.0;
    batch.records = random_window_flows(rng, n_hosts, n_flows, 0.0, 30.0, 0.1);
    const GraphSnapshot a = build_snapshot(batch);

    double total = 0.0;
    for (Eigen::Index e = 0; e < a.edge_features.rows(); ++e) total += std::expm1(a.edge_features(e, 0));
    worst_conservation = std::max(worst_conservation,
                                  std::abs(total - static_cast<double>(a.flow_count)) /
                                      static_cast<double>(a.flow_count));
    structure_ok = structure_ok && a.flow_count == batch.records.size();

    // Shuffling the flows relabels hosts by first appearance.
    WindowBatch shuffled = batch;
    shuffle(shuffled.records, rng);
    const GraphSnapshot b = build_snapshot(shuffled);
    if (a.num_nodes() != b.num_nodes() || a.num_edges() != b.num_edges()) {
      structure_ok = false;
      continue;
    }
    std::map<std::string, Eigen::Index> b_host;
    for (std::size_t i = 0; i < b.hosts.size(); ++i) b_host[b.hosts[i]] = static_cast<Eigen::Index>(i);
    std::map<std::pair<std::string, std::string>, Eigen::Index> b_edge;
    for (std::size_t e = 0; e < b.edges.size(); ++e)
      b_edge[{b.hosts[static_cast<std::size_t>(b.edges[e].src)], b.hosts[static_cast<std::size_t>(b.edges[e].dst)]}] =
          static_cast<Eigen::Index>(e);

    for (std::size_t i = 0; i < a.hosts.size(); ++i) {
      const Eigen::Index j = b_host.at(a.hosts[i]);
      worst_snapshot = std::max(worst_snapshot,
          (a.node_features.row(static_cast<Eigen::Index>(i)) - b.node_features.row(j)).cwiseAbs().maxCoeff());
      structure_ok = structure_ok && a.node_labels[i] == b.node_labels[static_cast<std::size_t>(j)];
    }
    std::vector<Eigen::Index> edge_map(a.num_edges());
    for (std::size_t e = 0; e < a.edges.size(); ++e) {
      const Eigen::Index f = b_edge.at({a.hosts[static_cast<std::size_t>(a.edges[e].src)],
                                        a.hosts[static_cast<std::size_t>(a.edges[e].dst)]});
      edge_map[e] = f;
      worst_snapshot = std::max(worst_snapshot,
          (a.edge_features.row(static_cast<Eigen::Index>(e)) - b.edge_features.row(f)).cwiseAbs().maxCoeff());
    }

    // Encoder equivariance with shared standardization.
    const FeatureStats stats = fit_feature_stats(std::span<const GraphSnapshot>(&a, 1));
    GraphSnapshot sa = a, sb = b;
    standardize(sa, stats);
    standardize(sb, stats);
    std::vector<std::uint8_t> no_mask_a(a.num_edges(), 0), no_mask_b(b.num_edges(), 0);
    // mask the same (relabelled) edge in both
    const std::size_t masked = uniform_index(rng, a.num_edges());
    no_mask_a[masked] = 1;
    no_mask_b[static_cast<std::size_t>(edge_map[masked])] = 1;
    const EdgePredictions pa = forward(params, sa, no_mask_a);
    const EdgePredictions pb = forward(params, sb, no_mask_b);
    for (std::size_t e = 0; e < a.num_edges(); ++e) {
      const Eigen::Index f = edge_map[e];
      const auto ie = static_cast<Eigen::Index>(e);
      worst_encoder = std::max({worst_encoder, (pa.reg.row(ie) - pb.reg.row(f)).cwiseAbs().maxCoeff(),
                                (pa.logits.row(ie) - pb.logits.row(f)).cwiseAbs().maxCoeff()});
    }
  }
  const bool pass = structure_ok && worst_conservation <= 1e-6 && worst_snapshot <= 1e-5 &&
                    worst_encoder <= 1e-5;
  return {pass, "conservation rel err " + fmt(worst_conservation) + ", snapshot perm err " +
                    fmt(worst_snapshot) + ", encoder perm err " + fmt(worst_encoder)};
}

// ---------------------------------------------------------------- 7-9

struct E2E {
  bool ran = false;
  std::string error;
  double seconds = 0.0;
  std::vector<EvaluationReport> calibrated;
  std::vector<EvaluationReport> raw;
  fs::path dir;
};

const EvaluationReport* find(const std::vector<EvaluationReport>& rs, const std::string& m) {
  for (const auto& r : rs)
    if (r.method == m) return &r;
  return nullptr;
}

E2E run_e2e(const fs::path& dir) {
  E2E out;
  out.dir = dir;
  fs::remove_all(dir);
  RunConfig cfg;  // default SynthConfig and default run settings
  cfg.out_dir = dir;
  const auto t0 = std::chrono::steady_clock::now();
  const int code = run_guarded(
      [&] {
        cfg.input = run_synth_gen(cfg);
        out.calibrated = run_all(cfg);
      },
      std::cerr);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (code != 0) {
    out.error = "pipeline exit code " + std::to_string(code);
    return out;
  }
  RunConfig raw_cfg = cfg;
  raw_cfg.calibrated = false;
  if (run_guarded([&] { out.raw = run_evaluate(raw_cfg); }, std::cerr) != 0) {
    out.error = "raw evaluate failed";
    return out;
  }
  out.ran = true;
  return out;
}

Outcome criterion7(const E2E& run) {
  if (!run.ran) return {false, run.error};
  const auto* m = find(run.calibrated, kModelMethod);
  const auto* f = find(run.calibrated, "iforest");
  if (!m || !f || !m->roc_auc || !f->roc_auc || !m->tpr_at(0.05)) return {false, "metrics undefined"};
  const double auc = *m->roc_auc;
  const double tpr5 = *m->tpr_at(0.05);
  const bool pass = auc >= 0.85 && tpr5 >= 0.60 && auc > *f->roc_auc && run.seconds <= 600.0;
  return {pass, "q90 ROC-AUC " + fmt(auc) + ", TPR@5%FPR " + fmt(tpr5) + ", IsolationForest ROC-AUC " +
                    fmt(*f->roc_auc) + ", runtime " + fmt(run.seconds) + " s (" +
                    std::to_string(m->positives) + " pos / " + std::to_string(m->negatives) + " neg)"};
}

Outcome criterion8(const E2E& run) {
  if (!run.ran) return {false, run.error};
  const auto* c = find(run.calibrated, kModelMethod);
  const auto* r = find(run.raw, kModelMethod);
  if (!c || !r || !c->roc_auc || !r->roc_auc) return {false, "metrics undefined"};
  return {*c->roc_auc >= *r->roc_auc,
          "calibrated ROC-AUC " + fmt(*c->roc_auc) + " vs raw " + fmt(*r->roc_auc)};
}

Outcome criterion9(const E2E& a, const E2E& b) {
  if (!a.ran || !b.ran) return {false, a.ran ? b.error : a.error};
  bool same = true;
  std::string detail;
  for (const char* name : {"report_q90.json", "report_q90.txt", "host_scores_q90.csv",
                           "synth_flows.csv", "edge_scores.csv", "checkpoint.json"}) {
    const bool eq = read_file(a.dir / name) == read_file(b.dir / name);
    same = same && eq;
    if (!eq) detail += std::string(name) + " differs; ";
  }
  return {same, same ? "reports, scores, checkpoint and synthetic CSV byte-identical across two runs"
                     : detail};
}

Outcome criterion10(const fs::path& work) {
  const char* path = std::getenv("EDGESEM_CICIDS2017_CSV");
  if (!path) return {true, "SKIPPED (optional; set EDGESEM_CICIDS2017_CSV to a CICIDS2017 flow CSV)"};
  RunConfig cfg;
  cfg.dataset_preset = "cicids2017";
  cfg.window_seconds = 60.0;
  cfg.input = path;
  cfg.out_dir = work / "cicids2017";
  std::vector<EvaluationReport> reports;
  if (run_guarded([&] { reports = run_all(cfg); }, std::cerr) != 0) return {false, "pipeline failed"};
  const auto* m = find(reports, kModelMethod);
  if (!m || !m->roc_auc || !m->tpr_at(0.05)) return {false, "metrics undefined"};
  const bool pass = std::abs(*m->roc_auc - 0.9753) <= 0.05 && std::abs(*m->tpr_at(0.05) - 0.8569) <= 0.10;
  return {pass, "ROC-AUC " + fmt(*m->roc_auc) + " (target 0.9753 +/- 0.05), TPR@5%FPR " +
                    fmt(*m->tpr_at(0.05)) + " (target 0.8569 +/- 0.10)"};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_work");
  fs::create_directories(work);

  struct Named {
    int id;
    const char* title;
    std::function<Outcome()> run;
  };
  E2E first, second;
  const std::vector<Named> criteria = {
      {1, "metric oracle equivalence", criterion1},
      {2, "gradient correctness", criterion2},
      {3, "masking contracts", criterion3},
      {4, "calibration properties", criterion4},
      {5, "aggregation properties", criterion5},
      {6, "graph conservation and permutation equivariance", criterion6},
      {7, "synthetic end-to-end gate", [&] {
         first = run_e2e(work / "run_a");
         return criterion7(first);
       }},
      {8, "calibrated >= raw ablation", [&] { return criterion8(first); }},
      {9, "run-all determinism", [&] {
         second = run_e2e(work / "run_b");
         return criterion9(first, second);
       }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::cout << "criterion " << c.id << ": " << (o.pass ? "PASS" : "FAIL") << " - " << c.title
              << " [" << o.detail << "] (" << fmt(secs) << " s)" << std::endl;
  }
  const Outcome opt = criterion10(work);
  std::cout << "criterion 10: " << (std::getenv("EDGESEM_CICIDS2017_CSV") ? (opt.pass ? "PASS" : "FAIL") : "SKIP")
            << " - optional CICIDS2017 reproduction, non-gating [" << opt.detail << "]" << std::endl;
  std::cout << (failed == 0 ? "all gating criteria passed" : std::to_string(failed) + " gating criteria failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
