#include "edgesem/score_io.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "csv.hpp"
#include "edgesem/errors.hpp"
#include "json_util.hpp"

namespace edgesem {

namespace {

constexpr const char* kFingerprintPrefix = "# fingerprint=";

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

// Reads the fingerprint line and the header, then hands each data row's
// fields to `row`.
template <class F>
std::string read_score_csv(const std::filesystem::path& path,
                           const std::vector<std::string>& header, F&& row) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  std::string fingerprint;
  if (!std::getline(in, line) || line.rfind(kFingerprintPrefix, 0) != 0)
    throw SchemaError(path.string() + ": missing fingerprint line");
  fingerprint = std::string(csv::trim(line.substr(std::string(kFingerprintPrefix).size())));
  if (!std::getline(in, line) || csv::split_line(line) != header)
    throw SchemaError(path.string() + ": unexpected header");
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    const auto fields = csv::split_line(line);
    if (fields.size() != header.size())
      throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": wrong field count");
    try {
      row(fields);
    } catch (const SchemaError& e) {
      throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return fingerprint;
}

double real_field(const std::string& s) {
  const auto v = csv::parse_double(s);
  if (!v) throw SchemaError("bad number '" + s + "'");
  return *v;
}

std::int64_t index_field(const std::string& s) {
  const double v = real_field(s);
  const auto i = static_cast<std::int64_t>(v);
  if (static_cast<double>(i) != v) throw SchemaError("bad window index '" + s + "'");
  return i;
}

const std::vector<std::string> kHostHeader = {"method", "window_index", "host", "score"};
const std::vector<std::string> kEdgeHeader = {"window_index", "src", "dst", "s_reg", "s_cls"};

}  // namespace

void write_host_scores(const std::filesystem::path& path,
                       std::span<const HostScoreRow> rows,
                       const std::string& fingerprint) {
  auto out = open_out(path);
  out << kFingerprintPrefix << fingerprint << "\nmethod,window_index,host,score\n";
  for (const auto& r : rows)
    out << csv::escape(r.method) << ',' << r.window_index << ',' << csv::escape(r.host)
        << ',' << csv::format_real(r.score) << '\n';
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

ScoreFile<HostScoreRow> read_host_scores(const std::filesystem::path& path) {
  ScoreFile<HostScoreRow> file;
  file.fingerprint = read_score_csv(path, kHostHeader, [&](const auto& f) {
    file.rows.push_back({f[0], index_field(f[1]), f[2], real_field(f[3])});
  });
  return file;
}

void write_edge_scores(const std::filesystem::path& path,
                       std::span<const EdgeScoreRow> rows,
                       const std::string& fingerprint) {
  auto out = open_out(path);
  out << kFingerprintPrefix << fingerprint << "\nwindow_index,src,dst,s_reg,s_cls\n";
  for (const auto& r : rows)
    out << r.window_index << ',' << csv::escape(r.src) << ',' << csv::escape(r.dst) << ','
        << csv::format_real(r.s_reg) << ',' << csv::format_real(r.s_cls) << '\n';
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

ScoreFile<EdgeScoreRow> read_edge_scores(const std::filesystem::path& path) {
  ScoreFile<EdgeScoreRow> file;
  file.fingerprint = read_score_csv(path, kEdgeHeader, [&](const auto& f) {
    file.rows.push_back({index_field(f[0]), f[1], f[2], real_field(f[3]), real_field(f[4])});
  });
  return file;
}

LabeledScores pool_instances(std::span<const GraphSnapshot> test,
                             std::span<const HostScoreRow> rows,
                             const std::string& method) {
  if (test.empty()) throw DataError("empty test set");
  std::map<std::pair<std::int64_t, std::string>, double> lookup;
  for (const auto& r : rows) {
    if (r.method != method) continue;
    if (!lookup.emplace(std::make_pair(r.window_index, r.host), r.score).second)
      throw DataError("duplicate " + method + " score for host '" + r.host + "' in window " +
                      std::to_string(r.window_index));
  }
  LabeledScores pooled;
  for (const auto& snap : test) {
    for (std::size_t h = 0; h < snap.hosts.size(); ++h) {
      const auto it = lookup.find({snap.window_index, snap.hosts[h]});
      if (it == lookup.end())
        throw DataError("no " + method + " score for host '" + snap.hosts[h] +
                        "' in window " + std::to_string(snap.window_index));
      pooled.scores.push_back(it->second);
      pooled.labels.push_back(snap.node_labels[h]);
    }
  }
  return pooled;
}

EvaluationReport evaluate_run(std::span<const GraphSnapshot> test,
                              std::span<const HostScoreRow> rows,
                              const std::string& method,
                              std::span<const double> fpr_budgets) {
  EvaluationReport r = evaluate_scores(pool_instances(test, rows, method), fpr_budgets);
  r.method = method;
  r.snapshots = test.size();
  return r;
}

namespace {

detail::json optional_json(const std::optional<double>& v) {
  return v ? detail::json(*v) : detail::json(nullptr);
}

std::string budget_key(double b) {
  std::ostringstream s;
  s << "tpr_at_" << std::setprecision(6) << b * 100.0 << "pct_fpr";
  return s.str();
}

std::string optional_text(const std::optional<double>& v) {
  if (!v) return "undefined";
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << *v;
  return s.str();
}

}  // namespace

void write_report_json(const std::filesystem::path& path,
                       std::span<const EvaluationReport> reports,
                       const ReportContext& ctx) {
  detail::json methods = detail::json::array();
  for (const auto& r : reports) {
    detail::json m{{"method", r.method},
                   {"roc_auc", optional_json(r.roc_auc)},
                   {"pr_auc", optional_json(r.pr_auc)},
                   {"positives", r.positives},
                   {"negatives", r.negatives},
                   {"snapshots", r.snapshots},
                   {"flags", r.flags}};
    for (const auto& t : r.tpr_at_fpr) m[budget_key(t.budget)] = optional_json(t.tpr);
    methods.push_back(std::move(m));
  }
  detail::json j{{"fingerprint", ctx.fingerprint},
                 {"aggregation", ctx.aggregation},
                 {"calibrated", ctx.calibrated},
                 {"seed", ctx.seed},
                 {"methods", std::move(methods)}};
  detail::write_json_file(path, j, 2);
}

void write_report_text(const std::filesystem::path& path,
                       std::span<const EvaluationReport> reports,
                       const ReportContext& ctx) {
  auto out = open_out(path);
  out << "fingerprint  " << ctx.fingerprint << '\n'
      << "aggregation  " << ctx.aggregation << '\n'
      << "calibrated   " << (ctx.calibrated ? "yes" : "no") << '\n'
      << "seed         " << ctx.seed << "\n\n";
  for (const auto& r : reports) {
    out << "[" << r.method << "]\n"
        << "  instances  " << r.positives + r.negatives << " (" << r.positives
        << " positive) over " << r.snapshots << " snapshots\n"
        << "  ROC-AUC    " << optional_text(r.roc_auc) << '\n'
        << "  PR-AUC     " << optional_text(r.pr_auc) << '\n';
    for (const auto& t : r.tpr_at_fpr)
      out << "  TPR@" << t.budget * 100.0 << "%FPR  " << optional_text(t.tpr) << '\n';
    for (const auto& f : r.flags) out << "  note: " << f << '\n';
    out << '\n';
  }
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

}  // namespace edgesem
