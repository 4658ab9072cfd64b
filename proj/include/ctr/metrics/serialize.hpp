#pragma once

#include <fstream>
#include <string>

#include "ctr/error.hpp"
#include "ctr/metrics/metrics.hpp"
#include "ctr/strings.hpp"

#include "json.hpp"

namespace ctr {

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j{{"logloss", r.logloss},
                   {"threshold", r.threshold},
                   {"tp", r.confusion.tp},
                   {"fp", r.confusion.fp},
                   {"tn", r.confusion.tn},
                   {"fn", r.confusion.fn},
                   {"precision", r.precision},
                   {"recall", r.recall},
                   {"f1", r.f1},
                   {"n_examples", r.n_examples}};
  if (r.auc) j["auc"] = *r.auc;
  return j;
}

inline nlohmann::json to_json(const CurveSeries& c) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& [x, y] : c.points) {
    points.push_back(nlohmann::json::array({x, y}));
  }
  return nlohmann::json{{"kind", to_string(c.kind)}, {"points", points}};
}

// Per-kind CSV column headers for curve files.
inline std::pair<std::string, std::string> curve_columns(CurveKind kind) {
  switch (kind) {
    case CurveKind::kRoc: return {"fpr", "tpr"};
    case CurveKind::kPrecisionVsThreshold: return {"threshold", "precision"};
    case CurveKind::kRecallVsThreshold: return {"threshold", "recall"};
    case CurveKind::kF1VsThreshold: return {"threshold", "f1"};
    case CurveKind::kPrecisionVsRecall: return {"recall", "precision"};
  }
  throw ConfigError("unknown curve kind");
}

inline std::string curve_to_csv(const CurveSeries& c) {
  const auto [x_name, y_name] = curve_columns(c.kind);
  std::string out = x_name + "," + y_name + "\n";
  for (const auto& [x, y] : c.points) {
    out += format_double(x) + "," + format_double(y) + "\n";
  }
  return out;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace ctr
