#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace edgesem {

// Undefined metrics (single-class input) come back as std::nullopt.

/// Fraction of (positive, negative) pairs ranked correctly; ties count 1/2.
std::optional<double> roc_auc(std::span<const double> scores,
                              std::span<const std::uint8_t> labels);

/// Step-wise average precision. Tied scores form one threshold, so every
/// positive in a tied block shares the precision at the end of that block.
std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const std::uint8_t> labels);

/// Highest TPR over thresholds at the distinct score values (alert when
/// score >= threshold) whose FPR stays within `fpr_budget`; 0 when none does.
std::optional<double> tpr_at_fpr(std::span<const double> scores,
                                 std::span<const std::uint8_t> labels,
                                 double fpr_budget);

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
};

/// ROC points (FPR, TPR) from (0,0) to (1,1), one per distinct threshold.
std::vector<CurvePoint> roc_curve(std::span<const double> scores,
                                  std::span<const std::uint8_t> labels);
/// Precision-recall points (recall, precision), one per distinct threshold.
std::vector<CurvePoint> pr_curve(std::span<const double> scores,
                                 std::span<const std::uint8_t> labels);

/// Pooled (snapshot, host) instances.
struct LabeledScores {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
};

struct TprAtFpr {
  double budget = 0.0;
  std::optional<double> tpr;
};

struct EvaluationReport {
  std::string method;
  std::optional<double> roc_auc;
  std::optional<double> pr_auc;
  std::vector<TprAtFpr> tpr_at_fpr;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t snapshots = 0;
  std::vector<std::string> flags;  ///< e.g. "no positive instances"

  std::optional<double> tpr_at(double budget) const;
};

/// Applies every metric to one pooled score list. Throws DataError on an
/// empty or ragged input.
EvaluationReport evaluate_scores(const LabeledScores& pooled,
                                 std::span<const double> fpr_budgets);

}  // namespace edgesem
