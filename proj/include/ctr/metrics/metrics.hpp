#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ctr/error.hpp"

namespace ctr {

inline constexpr double kMetricsProbClip = 1e-7;

// AUC as the Mann-Whitney statistic: the fraction of (positive, negative)
// pairs where the positive outscores the negative, ties counting one half.
// Computed through average ranks in O(n log n).
inline double auc(std::span<const std::uint8_t> labels,
                  std::span<const double> scores) {
  if (labels.size() != scores.size()) {
    throw ConfigError("auc: labels/scores length mismatch");
  }
  std::size_t n_pos = 0;
  for (std::uint8_t y : labels) n_pos += y;
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw DataError("AUC undefined: only one class present");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw DataError("AUC undefined: non-finite score");
  }

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    // 1-based ranks i+1..j share the average rank
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]]) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum_pos - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

// Mean negative Bernoulli log-likelihood with probability clipping.
// Intentionally a standalone twin of the model-side loss so evaluation
// never depends on model code.
inline double logloss(std::span<const std::uint8_t> labels,
                      std::span<const double> probs) {
  if (labels.size() != probs.size()) {
    throw ConfigError("logloss: labels/probs length mismatch");
  }
  if (labels.empty()) throw DataError("logloss of empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!std::isfinite(probs[i])) {
      throw DataError("logloss undefined: non-finite probability");
    }
    const double p =
        std::clamp(probs[i], kMetricsProbClip, 1.0 - kMetricsProbClip);
    total -= labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  return total / static_cast<double>(labels.size());
}

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

struct ClassifiedCounts {
  Confusion confusion;
  double precision = 0.0;  // 0 by convention when tp + fp == 0
  double recall = 0.0;     // 0 by convention when tp + fn == 0
  double f1 = 0.0;
};

// Prediction rule at a threshold is >= (documented convention).
inline ClassifiedCounts confusion_at(std::span<const std::uint8_t> labels,
                                     std::span<const double> probs,
                                     double threshold) {
  if (labels.size() != probs.size()) {
    throw ConfigError("confusion_at: length mismatch");
  }
  ClassifiedCounts out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred = probs[i] >= threshold;
    if (pred && labels[i]) ++out.confusion.tp;
    else if (pred && !labels[i]) ++out.confusion.fp;
    else if (!pred && labels[i]) ++out.confusion.fn;
    else ++out.confusion.tn;
  }
  const auto& c = out.confusion;
  if (c.tp + c.fp > 0) {
    out.precision =
        static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  }
  if (c.tp + c.fn > 0) {
    out.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  }
  if (out.precision + out.recall > 0.0) {
    out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  }
  return out;
}

enum class CurveKind {
  kRoc,
  kPrecisionVsThreshold,
  kRecallVsThreshold,
  kF1VsThreshold,
  kPrecisionVsRecall,
};

inline std::string to_string(CurveKind kind) {
  switch (kind) {
    case CurveKind::kRoc: return "roc";
    case CurveKind::kPrecisionVsThreshold: return "precision_vs_threshold";
    case CurveKind::kRecallVsThreshold: return "recall_vs_threshold";
    case CurveKind::kF1VsThreshold: return "f1_vs_threshold";
    case CurveKind::kPrecisionVsRecall: return "precision_vs_recall";
  }
  throw ConfigError("unknown curve kind");
}

struct CurveSeries {
  CurveKind kind = CurveKind::kRoc;
  std::vector<std::pair<double, double>> points;
};

inline std::vector<double> default_threshold_grid() {
  std::vector<double> grid(101);
  for (int i = 0; i <= 100; ++i) grid[static_cast<std::size_t>(i)] = i / 100.0;
  return grid;
}

struct ThresholdSweep {
  std::vector<double> grid;
  CurveSeries precision;  // vs threshold
  CurveSeries recall;
  CurveSeries f1;
  CurveSeries precision_recall;
  double best_f1_threshold = 0.0;  // lowest threshold attaining max F1
  double best_f1 = 0.0;
};

inline ThresholdSweep threshold_sweep(std::span<const std::uint8_t> labels,
                                      std::span<const double> probs,
                                      std::vector<double> grid = {}) {
  if (grid.empty()) grid = default_threshold_grid();
  if (!std::is_sorted(grid.begin(), grid.end())) {
    throw ConfigError("threshold grid must be sorted ascending");
  }
  ThresholdSweep sweep;
  sweep.grid = std::move(grid);
  sweep.precision.kind = CurveKind::kPrecisionVsThreshold;
  sweep.recall.kind = CurveKind::kRecallVsThreshold;
  sweep.f1.kind = CurveKind::kF1VsThreshold;
  sweep.precision_recall.kind = CurveKind::kPrecisionVsRecall;
  sweep.best_f1 = -1.0;
  for (double t : sweep.grid) {
    const ClassifiedCounts c = confusion_at(labels, probs, t);
    sweep.precision.points.emplace_back(t, c.precision);
    sweep.recall.points.emplace_back(t, c.recall);
    sweep.f1.points.emplace_back(t, c.f1);
    sweep.precision_recall.points.emplace_back(c.recall, c.precision);
    if (c.f1 > sweep.best_f1) {
      sweep.best_f1 = c.f1;
      sweep.best_f1_threshold = t;
    }
  }
  return sweep;
}

// ROC points (fpr, tpr) at every distinct score cut plus the (0,0) anchor;
// the final cut always lands on (1,1). Trapezoidal area under these points
// equals the pairwise AUC.
inline CurveSeries roc_points(std::span<const std::uint8_t> labels,
                              std::span<const double> scores) {
  std::size_t n_pos = 0;
  for (std::uint8_t y : labels) n_pos += y;
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw DataError("ROC undefined: only one class present");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw DataError("ROC undefined: non-finite score");
  }

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  CurveSeries series;
  series.kind = CurveKind::kRoc;
  series.points.emplace_back(0.0, 0.0);
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]]) ++tp; else ++fp;
    }
    series.points.emplace_back(
        static_cast<double>(fp) / static_cast<double>(n_neg),
        static_cast<double>(tp) / static_cast<double>(n_pos));
    i = j;
  }
  return series;
}

inline double trapezoid_area(const CurveSeries& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& [x0, y0] = curve.points[i - 1];
    const auto& [x1, y1] = curve.points[i];
    area += (x1 - x0) * (y0 + y1) * 0.5;
  }
  return area;
}

// Relative improvement |x_model - x_base| / x_base * 100 (percent).
inline double relative_improvement(double x_model, double x_base) {
  if (x_base == 0.0) throw DataError("relative improvement with zero base");
  return std::abs(x_model - x_base) / x_base * 100.0;
}

// Headline evaluation bundle at one threshold. The AUC slot is empty when
// only one class is present.
struct MetricsReport {
  std::optional<double> auc;
  double logloss = 0.0;
  double threshold = 0.0;
  Confusion confusion;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t n_examples = 0;
};

inline MetricsReport compute_report(std::span<const std::uint8_t> labels,
                                    std::span<const double> probs,
                                    double threshold) {
  MetricsReport report;
  report.threshold = threshold;
  report.n_examples = labels.size();
  report.logloss = logloss(labels, probs);
  std::size_t n_pos = 0;
  for (std::uint8_t y : labels) n_pos += y;
  if (n_pos > 0 && n_pos < labels.size()) {
    report.auc = auc(labels, probs);
  }
  const ClassifiedCounts c = confusion_at(labels, probs, threshold);
  report.confusion = c.confusion;
  report.precision = c.precision;
  report.recall = c.recall;
  report.f1 = c.f1;
  return report;
}

}  // namespace ctr
