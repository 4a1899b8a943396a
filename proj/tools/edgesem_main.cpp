#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "edgesem/errors.hpp"
#include "edgesem/pipeline.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string aggregation;
  bool no_calibration = false;
  std::vector<double> fpr_budgets;
  std::string out_dir;
  std::string input;
  std::string preset;
  bool plots = false;
  std::vector<std::string> settings;
  bool quiet = false;
};

edgesem::RunConfig resolve(const Overrides& o) {
  edgesem::RunConfig c = o.config_path.empty() ? edgesem::RunConfig{} : edgesem::load_config(o.config_path);
  for (const auto& kv : o.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw edgesem::ConfigError("--set expects key=value, got '" + kv + "'");
    edgesem::apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) c.seed = *o.seed;
  if (!o.aggregation.empty()) c.aggregation = edgesem::parse_aggregation(o.aggregation);
  if (o.no_calibration) c.calibrated = false;
  if (!o.fpr_budgets.empty()) c.fpr_budgets = o.fpr_budgets;
  if (!o.out_dir.empty()) c.out_dir = o.out_dir;
  if (!o.input.empty()) c.input = o.input;
  if (!o.preset.empty()) c.dataset_preset = o.preset;
  if (o.plots) c.plots = true;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"edgesem: benign-only host anomaly detection from flow logs"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  app.add_option("--config", o.config_path, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "global random seed");
  app.add_option("--aggregation", o.aggregation, "host aggregation operator")
      ->check(CLI::IsMember({"mean", "max", "q90", "topk"}));
  app.add_flag("--no-calibration", o.no_calibration, "aggregate raw edge scores (ablation)");
  app.add_option("--fpr-budgets", o.fpr_budgets, "FPR budgets for TPR@FPR, e.g. 0.01,0.05")
      ->delimiter(',');
  app.add_option("--out-dir", o.out_dir, "artifact directory");
  app.add_option("--input", o.input, "flow CSV to ingest");
  app.add_option("--preset", o.preset, "input schema preset")
      ->check(CLI::IsMember({"canonical", "ctu13", "cicids2017"}));
  app.add_flag("--plots", o.plots, "write ROC/PR/histogram SVGs during evaluate");
  app.add_option("--set", o.settings, "override a config key, key=value (repeatable)");
  app.add_flag("-q,--quiet", o.quiet, "no progress output");

  auto* ingest = app.add_subcommand("ingest", "normalize a flow CSV into records.csv");
  auto* build = app.add_subcommand("build-graphs", "window records into graph snapshots");
  auto* train = app.add_subcommand("train", "fit the model on benign training snapshots");
  auto* score = app.add_subcommand("score", "calibrate and score test edges and baselines");
  auto* evaluate = app.add_subcommand("evaluate", "aggregate host scores and write reports");
  auto* synth = app.add_subcommand("synth-gen", "generate synthetic flows with C2 beacons");
  auto* all = app.add_subcommand("run-all", "ingest through evaluate in one go");
  app.add_subcommand("print-config", "print the resolved configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : edgesem::kExitUsage;
  }

  const edgesem::Logger log = [&](const std::string& msg) {
    if (!o.quiet) std::cerr << msg << '\n';
  };
  return edgesem::run_guarded(
      [&] {
        const edgesem::RunConfig c = resolve(o);
        if (*ingest) edgesem::run_ingest(c, log);
        else if (*build) edgesem::run_build_graphs(c, log);
        else if (*train) edgesem::run_train(c, log);
        else if (*score) edgesem::run_score(c, log);
        else if (*evaluate) edgesem::run_evaluate(c, log);
        else if (*synth) std::cout << edgesem::run_synth_gen(c, log).string() << '\n';
        else if (*all) edgesem::run_all(c, log);
        else std::cout << edgesem::to_config_text(c);
      },
      std::cerr);
}
