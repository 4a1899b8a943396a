#include "edgesem/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "edgesem/errors.hpp"

namespace edgesem {

namespace {

struct Block {
  std::uint64_t pos = 0;
  std::uint64_t neg = 0;
};

// Tie blocks in descending score order.
std::vector<Block> descending_blocks(std::span<const double> scores,
                                     std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size())
    throw DataError("scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i == 0 || scores[order[i]] != scores[order[i - 1]]) blocks.emplace_back();
    if (labels[order[i]]) {
      ++blocks.back().pos;
    } else {
      ++blocks.back().neg;
    }
  }
  return blocks;
}

Block totals(const std::vector<Block>& blocks) {
  Block t;
  for (const Block& b : blocks) {
    t.pos += b.pos;
    t.neg += b.neg;
  }
  return t;
}

}  // namespace

std::optional<double> roc_auc(std::span<const double> scores,
                              std::span<const std::uint8_t> labels) {
  const auto blocks = descending_blocks(scores, labels);
  const Block t = totals(blocks);
  if (t.pos == 0 || t.neg == 0) return std::nullopt;
  // Twice the number of correctly ordered pairs, so ties stay integral.
  std::uint64_t twice_correct = 0;
  std::uint64_t neg_below = t.neg;
  for (const Block& b : blocks) {
    neg_below -= b.neg;
    twice_correct += 2 * b.pos * neg_below + b.pos * b.neg;
  }
  return static_cast<double>(twice_correct) /
         (2.0 * static_cast<double>(t.pos) * static_cast<double>(t.neg));
}

std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const std::uint8_t> labels) {
  const auto blocks = descending_blocks(scores, labels);
  const Block t = totals(blocks);
  if (t.pos == 0) return std::nullopt;
  const auto p = static_cast<double>(t.pos);
  double ap = 0.0;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  for (const Block& b : blocks) {
    tp += b.pos;
    fp += b.neg;
    if (b.pos == 0) continue;
    ap += static_cast<double>(b.pos) / p *
          (static_cast<double>(tp) / static_cast<double>(tp + fp));
  }
  return ap;
}

std::optional<double> tpr_at_fpr(std::span<const double> scores,
                                 std::span<const std::uint8_t> labels,
                                 double fpr_budget) {
  const auto blocks = descending_blocks(scores, labels);
  const Block t = totals(blocks);
  if (t.pos == 0 || t.neg == 0) return std::nullopt;
  const auto p = static_cast<double>(t.pos);
  const auto n = static_cast<double>(t.neg);
  double best = 0.0;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  for (const Block& b : blocks) {
    tp += b.pos;
    fp += b.neg;
    if (static_cast<double>(fp) / n <= fpr_budget)
      best = std::max(best, static_cast<double>(tp) / p);
  }
  return best;
}

std::vector<CurvePoint> roc_curve(std::span<const double> scores,
                                  std::span<const std::uint8_t> labels) {
  const auto blocks = descending_blocks(scores, labels);
  const Block t = totals(blocks);
  std::vector<CurvePoint> pts{{0.0, 0.0}};
  if (t.pos == 0 || t.neg == 0) return pts;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  for (const Block& b : blocks) {
    tp += b.pos;
    fp += b.neg;
    pts.push_back({static_cast<double>(fp) / static_cast<double>(t.neg),
                   static_cast<double>(tp) / static_cast<double>(t.pos)});
  }
  return pts;
}

std::vector<CurvePoint> pr_curve(std::span<const double> scores,
                                 std::span<const std::uint8_t> labels) {
  const auto blocks = descending_blocks(scores, labels);
  const Block t = totals(blocks);
  std::vector<CurvePoint> pts;
  if (t.pos == 0) return pts;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  for (const Block& b : blocks) {
    tp += b.pos;
    fp += b.neg;
    pts.push_back({static_cast<double>(tp) / static_cast<double>(t.pos),
                   static_cast<double>(tp) / static_cast<double>(tp + fp)});
  }
  return pts;
}

std::optional<double> EvaluationReport::tpr_at(double budget) const {
  for (const TprAtFpr& t : tpr_at_fpr)
    if (t.budget == budget) return t.tpr;
  return std::nullopt;
}

EvaluationReport evaluate_scores(const LabeledScores& pooled,
                                 std::span<const double> fpr_budgets) {
  if (pooled.scores.empty()) throw DataError("no scored instances to evaluate");
  if (pooled.scores.size() != pooled.labels.size())
    throw DataError("scores and labels differ in length");

  EvaluationReport r;
  for (std::uint8_t l : pooled.labels) {
    if (l) {
      ++r.positives;
    } else {
      ++r.negatives;
    }
  }
  if (r.positives == 0) r.flags.push_back("no positive instances: AUC metrics undefined");
  if (r.negatives == 0) r.flags.push_back("no negative instances: AUC metrics undefined");

  r.roc_auc = roc_auc(pooled.scores, pooled.labels);
  r.pr_auc = average_precision(pooled.scores, pooled.labels);
  for (double b : fpr_budgets)
    r.tpr_at_fpr.push_back({b, tpr_at_fpr(pooled.scores, pooled.labels, b)});
  return r;
}

}  // namespace edgesem
