#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "ctr/error.hpp"
#include "ctr/pipeline/online.hpp"
#include "ctr/pipeline/sweep.hpp"
#include "ctr/strings.hpp"

#include "json.hpp"

namespace ctr {

// CSVs deliberately omit wall-clock columns so outputs are byte-identical
// across reruns with the same seed.

inline std::string predictions_to_csv(
    std::span<const PredictionRecord> predictions) {
  std::string out = "id,label,prob,generation\n";
  for (const auto& p : predictions) {
    out += std::to_string(p.index) + "," + std::to_string(int(p.label)) +
           "," + format_double(p.prob) + "," + std::to_string(p.generation) +
           "\n";
  }
  return out;
}

inline std::string generation_log_to_csv(
    std::span<const GenerationRecord> generations) {
  std::string out =
      "generation,trained_through,scored_from,scored_to,cum_auc,cum_logloss\n";
  for (const auto& g : generations) {
    out += std::to_string(g.generation) + "," +
           std::to_string(g.trained_through) + "," +
           std::to_string(g.scored_from) + "," + std::to_string(g.scored_to) +
           ",";
    if (g.cum_auc) out += format_double(*g.cum_auc);
    out += ",";
    if (g.cum_logloss) out += format_double(*g.cum_logloss);
    out += "\n";
  }
  return out;
}

inline nlohmann::json to_json(std::span<const GenerationRecord> generations) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& g : generations) {
    nlohmann::json j{{"generation", g.generation},
                     {"trained_through", g.trained_through},
                     {"scored_from", g.scored_from},
                     {"scored_to", g.scored_to}};
    if (g.cum_auc) j["cum_auc"] = *g.cum_auc;
    if (g.cum_logloss) j["cum_logloss"] = *g.cum_logloss;
    arr.push_back(j);
  }
  return arr;
}

// Per-cell rows (M-major, seeds in run order) followed by one mean row per
// M with "mean" in the seed column.
inline std::string sweep_to_csv(const SweepResult& sweep) {
  std::string out = "M,seed,auc,logloss\n";
  for (const auto& cell : sweep.cells) {
    out += std::to_string(cell.m) + "," + std::to_string(cell.seed) + "," +
           format_double(cell.auc) + "," + format_double(cell.logloss) + "\n";
  }
  for (const auto& mean : sweep.means) {
    out += std::to_string(mean.m) + ",mean," + format_double(mean.auc) + "," +
           format_double(mean.logloss) + "\n";
  }
  return out;
}

inline nlohmann::json to_json(const SweepResult& sweep) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& cell : sweep.cells) {
    cells.push_back(nlohmann::json{{"M", cell.m},
                                   {"seed", cell.seed},
                                   {"auc", cell.auc},
                                   {"logloss", cell.logloss}});
  }
  nlohmann::json means = nlohmann::json::array();
  for (const auto& mean : sweep.means) {
    means.push_back(nlohmann::json{
        {"M", mean.m}, {"auc", mean.auc}, {"logloss", mean.logloss}});
  }
  return nlohmann::json{{"cells", cells}, {"means", means}};
}

struct LabeledProbs {
  std::vector<std::uint8_t> labels;
  std::vector<double> probs;
};

// Reads a predictions CSV; needs at least `label` and `prob` columns (the
// id/generation columns of the standard dump are accepted and ignored).
inline LabeledProbs read_predictions_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open predictions file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty predictions file: " + path);

  const auto header = split(strip_cr(line), ',');
  std::ptrdiff_t label_col = -1, prob_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "label") label_col = static_cast<std::ptrdiff_t>(i);
    if (header[i] == "prob") prob_col = static_cast<std::ptrdiff_t>(i);
  }
  if (label_col < 0 || prob_col < 0) {
    throw ParseError("predictions file needs 'label' and 'prob' columns: " +
                     path);
  }

  LabeledProbs out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto stripped = strip_cr(line);
    if (stripped.empty()) continue;
    const auto fields = split(stripped, ',');
    if (fields.size() != header.size()) {
      throw ParseError("bad column count at line " + std::to_string(line_no) +
                       " of " + path);
    }
    const auto label_text = fields[static_cast<std::size_t>(label_col)];
    if (label_text != "0" && label_text != "1") {
      throw ParseError("bad label at line " + std::to_string(line_no) +
                       " of " + path);
    }
    out.labels.push_back(label_text == "1" ? 1 : 0);
    out.probs.push_back(parse_double(fields[static_cast<std::size_t>(prob_col)]));
  }
  if (out.labels.empty()) {
    throw DataError("predictions file has no rows: " + path);
  }
  return out;
}

}  // namespace ctr
