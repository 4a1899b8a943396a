#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "edgesem/graph_builder.hpp"
#include "edgesem/metrics.hpp"

namespace edgesem {

/// One host score of one snapshot. Shared by the model and the baselines.
struct HostScoreRow {
  std::string method;
  std::int64_t window_index = 0;
  std::string host;
  double score = 0.0;

  bool operator==(const HostScoreRow&) const = default;
};

/// Raw reconstruction discrepancies of one edge.
struct EdgeScoreRow {
  std::int64_t window_index = 0;
  std::string src;
  std::string dst;
  double s_reg = 0.0;
  double s_cls = 0.0;

  bool operator==(const EdgeScoreRow&) const = default;
};

template <class Row>
struct ScoreFile {
  std::string fingerprint;
  std::vector<Row> rows;
};

// CSV files start with a "# fingerprint=<hex>" line.
void write_host_scores(const std::filesystem::path& path,
                       std::span<const HostScoreRow> rows,
                       const std::string& fingerprint);
ScoreFile<HostScoreRow> read_host_scores(const std::filesystem::path& path);

void write_edge_scores(const std::filesystem::path& path,
                       std::span<const EdgeScoreRow> rows,
                       const std::string& fingerprint);
ScoreFile<EdgeScoreRow> read_edge_scores(const std::filesystem::path& path);

/// Pools one instance per (test snapshot, host) using the rows of `method`.
/// The result does not depend on row order. Throws DataError when the test
/// set is empty, a host lacks a score, or a row is duplicated.
EvaluationReport evaluate_run(std::span<const GraphSnapshot> test,
                              std::span<const HostScoreRow> rows,
                              const std::string& method,
                              std::span<const double> fpr_budgets);

/// Pooled instances in test-snapshot, host order (for plots).
LabeledScores pool_instances(std::span<const GraphSnapshot> test,
                             std::span<const HostScoreRow> rows,
                             const std::string& method);

/// Run metadata copied into every report.
struct ReportContext {
  std::string fingerprint;
  std::string aggregation;
  bool calibrated = true;
  std::uint64_t seed = 0;
};

void write_report_json(const std::filesystem::path& path,
                       std::span<const EvaluationReport> reports,
                       const ReportContext& context);
void write_report_text(const std::filesystem::path& path,
                       std::span<const EvaluationReport> reports,
                       const ReportContext& context);

}  // namespace edgesem
