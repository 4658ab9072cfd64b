// Command-line front end: preprocess raw TSV, train a model offline,
// simulate prequential online serving (single M or a full sweep), and emit
// evaluation reports. Progress goes to stderr, results to stdout or files.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 numerical divergence,
// 4 checkpoint/dataset incompatibility.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "ctr/data/io.hpp"
#include "ctr/error.hpp"
#include "ctr/metrics/serialize.hpp"
#include "ctr/model/checkpoint.hpp"
#include "ctr/pipeline/export.hpp"
#include "ctr/pipeline/online.hpp"
#include "ctr/pipeline/sweep.hpp"
#include "ctr/strings.hpp"

#include "CLI11.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace ctr;

namespace {

std::uint64_t parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("not a non-negative integer: '" + std::string(s) + "'");
  }
  return v;
}

// "400", "100,200,300" or "100..1000" (inclusive, stepped).
std::vector<std::size_t> parse_m_spec(const std::string& spec,
                                      std::size_t step) {
  std::vector<std::size_t> ms;
  if (const auto dots = spec.find(".."); dots != std::string::npos) {
    const auto lo = parse_u64(std::string_view(spec).substr(0, dots));
    const auto hi = parse_u64(std::string_view(spec).substr(dots + 2));
    if (lo == 0 || hi < lo || step == 0) {
      throw ConfigError("bad M range: '" + spec + "'");
    }
    for (std::uint64_t m = lo; m <= hi; m += step) {
      ms.push_back(static_cast<std::size_t>(m));
    }
    return ms;
  }
  for (const auto part : split(spec, ',')) {
    const auto m = parse_u64(part);
    if (m == 0) throw ConfigError("M must be >= 1");
    ms.push_back(static_cast<std::size_t>(m));
  }
  return ms;
}

std::vector<std::size_t> parse_width_list(const std::string& spec) {
  std::vector<std::size_t> widths;
  for (const auto part : split(spec, ',')) {
    widths.push_back(static_cast<std::size_t>(parse_u64(part)));
  }
  return widths;
}

// "start:stop:step" inclusive grid.
std::vector<double> parse_grid(const std::string& spec) {
  const auto parts = split(spec, ':');
  if (parts.size() != 3) {
    throw ConfigError("threshold grid must be start:stop:step");
  }
  const double start = parse_double(parts[0]);
  const double stop = parse_double(parts[1]);
  const double step = parse_double(parts[2]);
  if (step <= 0.0 || stop < start) {
    throw ConfigError("bad threshold grid: '" + spec + "'");
  }
  std::vector<double> grid;
  const auto count = static_cast<std::size_t>((stop - start) / step + 1.5);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = start + static_cast<double>(i) * step;
    if (t > stop + 1e-12) break;
    grid.push_back(std::min(t, stop));
  }
  return grid;
}

std::vector<std::uint8_t> labels_of(std::span<const EncodedExample> examples) {
  std::vector<std::uint8_t> labels(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    labels[i] = examples[i].label;
  }
  return labels;
}

nlohmann::json history_to_json(const TrainHistory& history) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : history.epochs) {
    nlohmann::json j{{"epoch", e.epoch},
                     {"train_loss", e.mean_train_loss},
                     {"val_logloss", e.val_logloss}};
    if (e.val_auc) j["val_auc"] = *e.val_auc;
    epochs.push_back(j);
  }
  return nlohmann::json{
      {"epochs", epochs},
      {"total_iterations", history.total_iterations},
      {"low_iteration_warning", history.low_iteration_warning}};
}

// ---------------------------------------------------------------------
// preprocess

struct PreprocessArgs {
  std::string input;
  std::string output;
  std::uint32_t min_freq = 4;
  std::uint64_t seed = 1;
  std::string rebalance = "none";
  std::size_t max_bad_lines = 0;
};

void cmd_preprocess(const PreprocessArgs& args) {
  std::ifstream in(args.input);
  if (!in) throw IoError("cannot open input: " + args.input);

  std::vector<RawRecord> records;
  std::vector<std::size_t> bad_lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (strip_cr(line).empty()) continue;
    try {
      records.push_back(parse_line(line, /*has_label=*/true, line_no));
    } catch (const ParseError& e) {
      bad_lines.push_back(line_no);
      if (bad_lines.size() > args.max_bad_lines) {
        std::string listed;
        for (std::size_t i = 0; i < std::min<std::size_t>(bad_lines.size(), 10); ++i) {
          listed += (i ? ", " : "") + std::to_string(bad_lines[i]);
        }
        throw DataError("too many malformed lines (" +
                        std::to_string(bad_lines.size()) + " > " +
                        std::to_string(args.max_bad_lines) +
                        "), first at: " + listed + "; last error: " + e.what());
      }
      std::cerr << "skipping malformed line " << line_no << ": " << e.what()
                << "\n";
    }
  }
  if (records.empty()) throw DataError("empty corpus: " + args.input);

  EncodedDataset ds;
  ds.vocab = build_vocabulary(records, args.min_freq);
  std::vector<EncodedExample> examples;
  examples.reserve(records.size());
  for (const auto& rec : records) examples.push_back(encode(rec, ds.vocab));

  if (args.rebalance == "undersample") {
    examples = rebalance(examples, RebalanceMode::kUndersample, args.seed);
  } else if (args.rebalance == "oversample") {
    examples = rebalance(examples, RebalanceMode::kOversample, args.seed);
  } else if (args.rebalance != "none") {
    throw ConfigError("rebalance must be none, undersample or oversample");
  }

  ds.split = split_and_partition(std::move(examples), args.seed);
  save_encoded(ds, args.output);

  std::size_t pos = 0, total = 0;
  const auto count = [&](const std::vector<EncodedExample>& part) {
    auto [p, n] = class_counts(part);
    pos += p;
    total += p + n;
  };
  for (const auto& part : ds.split.train_partitions) count(part);
  count(ds.split.val_partition);
  count(ds.split.test_partition);
  const std::size_t neg = total - pos;

  std::cout << "rows=" << total << "\n";
  std::cout << "train_partitions=" << ds.split.train_partitions.size();
  for (const auto& part : ds.split.train_partitions) {
    std::cout << " " << part.size();
  }
  std::cout << "\nval=" << ds.split.val_partition.size()
            << "\ntest=" << ds.split.test_partition.size() << "\n";
  std::cout << "features=" << ds.vocab.total_features << "\n";
  std::cout << "positives=" << pos << "\nnegatives=" << neg << "\n";
  std::cout << "class_ratio="
            << (neg ? format_double(static_cast<double>(pos) /
                                    static_cast<double>(neg))
                    : std::string("inf"))
            << "\n";
}

// ---------------------------------------------------------------------
// train

struct TrainArgs {
  std::string data;
  std::string model = "fignn";
  std::string out_dir;
  std::size_t embed_dim = 16;
  std::size_t heads = 2;
  std::size_t gnn_steps = 2;
  std::string mlp_hidden = "64,32";
  double init_scale = 0.01;
  std::uint64_t seed = 1;
  std::size_t batch_size = 100;
  std::size_t epochs = 3;
  double learning_rate = 1e-3;
  double threshold = 0.3;
};

void cmd_train(const TrainArgs& args) {
  const EncodedDataset ds = load_encoded(args.data);

  ModelConfig config;
  config.kind = model_kind_from_string(args.model);
  config.embed_dim = args.embed_dim;
  config.attention_heads = args.heads;
  config.gnn_steps = args.gnn_steps;
  config.mlp_hidden = parse_width_list(args.mlp_hidden);
  config.init_scale = args.init_scale;
  config.seed = args.seed;

  OnlineConfig online;
  online.offline_batch_size = args.batch_size;
  online.offline_epochs = args.epochs;
  online.learning_rate = args.learning_rate;
  online.eval_threshold = args.threshold;

  Model model = Model::init(config, ds.vocab.field_sizes, args.learning_rate);
  const TrainHistory history =
      train_offline(model, ds.split, online, args.seed, &std::cerr);

  const auto probs = model.predict(ds.split.test_partition);
  const auto labels = labels_of(ds.split.test_partition);
  const MetricsReport report = compute_report(labels, probs, args.threshold);

  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);
  save_checkpoint(model, (out / "checkpoint.ctrm").string());

  std::vector<PredictionRecord> predictions(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    predictions[i] = PredictionRecord{i, labels[i], probs[i], 0};
  }
  write_file((out / "test_predictions.csv").string(),
             predictions_to_csv(predictions));

  nlohmann::json metrics{{"config", to_json(config)},
                         {"offline",
                          {{"batch_size", args.batch_size},
                           {"epochs", args.epochs},
                           {"learning_rate", args.learning_rate}}},
                         {"history", history_to_json(history)},
                         {"test", to_json(report)}};
  write_file((out / "metrics.json").string(), metrics.dump(2) + "\n");

  std::cout << "model=" << args.model << "\n";
  if (report.auc) std::cout << "test_auc=" << format_double(*report.auc) << "\n";
  std::cout << "test_logloss=" << format_double(report.logloss) << "\n";
  std::cout << "checkpoint=" << (out / "checkpoint.ctrm").string() << "\n";
}

// ---------------------------------------------------------------------
// online

struct OnlineArgs {
  std::string data;
  std::string checkpoint;
  std::string out_dir;
  std::string m_spec = "400";
  std::size_t m_step = 100;
  std::size_t seed_count = 3;
  std::string seed_list;
  std::size_t passes = 1;
  std::size_t batch_size = 100;
  std::size_t epochs = 3;
  double learning_rate = 1e-3;
  double threshold = 0.3;
  unsigned threads = 0;
  bool rescore_final = false;
};

std::vector<std::uint64_t> resolve_seeds(const OnlineArgs& args) {
  if (!args.seed_list.empty()) {
    std::vector<std::uint64_t> seeds;
    for (const auto part : split(args.seed_list, ',')) {
      seeds.push_back(parse_u64(part));
    }
    return seeds;
  }
  if (args.seed_count == 0) throw ConfigError("need at least one seed");
  std::vector<std::uint64_t> seeds(args.seed_count);
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = i + 1;
  return seeds;
}

void cmd_online(const OnlineArgs& args) {
  const EncodedDataset ds = load_encoded(args.data);
  Model loaded = load_checkpoint(args.checkpoint);
  check_compatible(loaded, ds.vocab.field_sizes);

  OnlineConfig config;
  config.offline_batch_size = args.batch_size;
  config.offline_epochs = args.epochs;
  config.online_passes_per_retrain = args.passes;
  config.seeds = resolve_seeds(args);
  config.learning_rate = args.learning_rate;
  config.eval_threshold = args.threshold;

  const std::vector<std::size_t> ms = parse_m_spec(args.m_spec, args.m_step);
  const unsigned threads =
      args.threads ? args.threads : std::thread::hardware_concurrency();

  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);

  SweepResult result;
  std::vector<OnlineResult> runs;
  if (ms.size() == 1) {
    // single M: continue from the checkpoint, one run per seed
    result.ms = ms;
    for (const std::uint64_t seed : config.seeds) {
      Model model = loaded;
      OnlineConfig cell = config;
      cell.learning_batch_size = ms[0];
      const OnlineResult run =
          run_online(model, ds.split.test_partition, cell, seed,
                     args.rescore_final);
      SweepCell row;
      row.m = ms[0];
      row.seed = seed;
      row.auc = (args.rescore_final ? run.rescored_auc : run.auc).value_or(0.5);
      row.logloss = args.rescore_final
                        ? run.rescored_logloss.value_or(run.logloss)
                        : run.logloss;
      result.cells.push_back(row);
      runs.push_back(run);
      std::cerr << "M=" << row.m << " seed=" << seed
                << " retrains=" << run.retrain_count << " auc="
                << format_double(row.auc) << "\n";
    }
    SweepMeans mean;
    mean.m = ms[0];
    for (const auto& cell : result.cells) {
      mean.auc += cell.auc;
      mean.logloss += cell.logloss;
    }
    mean.auc /= static_cast<double>(result.cells.size());
    mean.logloss /= static_cast<double>(result.cells.size());
    result.means.push_back(mean);
  } else {
    // sweep: fresh init + offline training per seed (checkpoint provides
    // the architecture), then one online run per (M, seed)
    result = sweep_M(ds.split, loaded.config(), ds.vocab.field_sizes, ms,
                     config, threads, &std::cerr, args.rescore_final, &runs);
  }

  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    const auto& cell = result.cells[i];
    const std::string tag =
        "M" + std::to_string(cell.m) + "_seed" + std::to_string(cell.seed);
    write_file((out / ("generation_log_" + tag + ".csv")).string(),
               generation_log_to_csv(runs[i].generations));
    write_file((out / ("predictions_" + tag + ".csv")).string(),
               predictions_to_csv(runs[i].predictions));
  }
  write_file((out / "results.csv").string(), sweep_to_csv(result));
  write_file((out / "results.json").string(), to_json(result).dump(2) + "\n");

  for (const auto& mean : result.means) {
    std::cout << "M=" << mean.m << " mean_auc=" << format_double(mean.auc)
              << " mean_logloss=" << format_double(mean.logloss) << "\n";
  }
}

// ---------------------------------------------------------------------
// report

struct ReportArgs {
  std::string predictions;
  std::string out_dir;
  std::string grid = "0:1:0.01";
  double threshold = 0.3;
};

void cmd_report(const ReportArgs& args) {
  const LabeledProbs data = read_predictions_csv(args.predictions);
  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);

  std::size_t pos = 0;
  for (auto y : data.labels) pos += y;
  const bool two_class = pos > 0 && pos < data.labels.size();
  if (!two_class) {
    std::cerr << "warning: predictions contain a single class; AUC and ROC "
                 "are omitted\n";
  }

  const ThresholdSweep sweep =
      threshold_sweep(data.labels, data.probs, parse_grid(args.grid));
  write_file((out / "f1_vs_threshold.csv").string(), curve_to_csv(sweep.f1));
  write_file((out / "precision_vs_threshold.csv").string(),
             curve_to_csv(sweep.precision));
  write_file((out / "recall_vs_threshold.csv").string(),
             curve_to_csv(sweep.recall));
  write_file((out / "precision_recall.csv").string(),
             curve_to_csv(sweep.precision_recall));
  if (two_class) {
    write_file((out / "roc.csv").string(),
               curve_to_csv(roc_points(data.labels, data.probs)));
  }

  const MetricsReport headline =
      compute_report(data.labels, data.probs, args.threshold);
  const MetricsReport at_best =
      compute_report(data.labels, data.probs, sweep.best_f1_threshold);
  nlohmann::json confusion{{"at_threshold", to_json(headline)},
                           {"at_best_f1", to_json(at_best)},
                           {"best_f1_threshold", sweep.best_f1_threshold}};
  write_file((out / "confusion.json").string(), confusion.dump(2) + "\n");

  nlohmann::json metrics = to_json(headline);
  metrics["best_f1_threshold"] = sweep.best_f1_threshold;
  metrics["best_f1"] = sweep.best_f1;
  write_file((out / "metrics.json").string(), metrics.dump(2) + "\n");

  if (headline.auc) std::cout << "auc=" << format_double(*headline.auc) << "\n";
  std::cout << "logloss=" << format_double(headline.logloss) << "\n";
  std::cout << "best_f1_threshold=" << format_double(sweep.best_f1_threshold)
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"click-through-rate prediction pipeline"};
  app.require_subcommand(1);

  PreprocessArgs pre;
  CLI::App* preprocess = app.add_subcommand(
      "preprocess", "parse, encode, split and save a Criteo-format TSV");
  preprocess->add_option("-i,--input", pre.input, "raw TSV path")->required();
  preprocess->add_option("-o,--output", pre.output, "encoded dataset path")
      ->required();
  preprocess->add_option("--min-freq", pre.min_freq,
                         "minimum token frequency kept in the vocabulary");
  preprocess->add_option("--seed", pre.seed, "shuffle seed");
  preprocess->add_option("--rebalance", pre.rebalance,
                         "none | undersample | oversample");
  preprocess->add_option("--max-bad-lines", pre.max_bad_lines,
                         "tolerated malformed lines before aborting");

  TrainArgs train;
  CLI::App* train_cmd =
      app.add_subcommand("train", "offline training plus test evaluation");
  train_cmd->add_option("--data", train.data, "encoded dataset")->required();
  train_cmd->add_option("--model", train.model, "lr | fm | deepfm | fignn")
      ->required();
  train_cmd->add_option("--out-dir", train.out_dir, "output directory")
      ->required();
  train_cmd->add_option("--embed-dim", train.embed_dim, "embedding width k");
  train_cmd->add_option("--heads", train.heads, "attention heads");
  train_cmd->add_option("--gnn-steps", train.gnn_steps, "propagation steps T");
  train_cmd->add_option("--mlp-hidden", train.mlp_hidden,
                        "hidden widths, comma separated");
  train_cmd->add_option("--init-scale", train.init_scale, "uniform init bound");
  train_cmd->add_option("--seed", train.seed, "init and shuffle seed");
  train_cmd->add_option("--offline-batch-size", train.batch_size,
                        "minibatch size");
  train_cmd->add_option("--epochs", train.epochs, "passes over the 8 partitions");
  train_cmd->add_option("--learning-rate", train.learning_rate, "Adam step size");
  train_cmd->add_option("--threshold", train.threshold,
                        "classification threshold for the report");

  OnlineArgs online;
  CLI::App* online_cmd = app.add_subcommand(
      "online", "prequential online serving with batched retraining");
  online_cmd->add_option("--data", online.data, "encoded dataset")->required();
  online_cmd->add_option("--checkpoint", online.checkpoint, "model checkpoint")
      ->required();
  online_cmd->add_option("--out-dir", online.out_dir, "output directory")
      ->required();
  online_cmd->add_option(
      "--M", online.m_spec,
      "learning batch size: one value, a comma list, or lo..hi");
  online_cmd->add_option("--M-step", online.m_step, "step for lo..hi ranges");
  online_cmd->add_option("--seeds", online.seed_count,
                         "number of seeds (1..N)");
  online_cmd->add_option("--seed-list", online.seed_list,
                         "explicit comma-separated seeds");
  online_cmd->add_option("--passes", online.passes,
                         "passes over each accumulated batch per retrain");
  online_cmd->add_option("--offline-batch-size", online.batch_size,
                         "minibatch size (retrains and sweep offline phase)");
  online_cmd->add_option("--epochs", online.epochs,
                         "offline epochs for sweep runs");
  online_cmd->add_option("--learning-rate", online.learning_rate,
                         "Adam step size");
  online_cmd->add_option("--threshold", online.threshold,
                         "classification threshold");
  online_cmd->add_option("--threads", online.threads,
                         "max concurrent sweep cells (default: hardware)");
  online_cmd->add_flag("--rescore-final", online.rescore_final,
                       "report metrics by re-scoring the whole stream with "
                       "the final generation instead of prequentially");

  ReportArgs report;
  CLI::App* report_cmd = app.add_subcommand(
      "report", "threshold sweeps, curves and confusion matrices");
  report_cmd->add_option("--predictions", report.predictions,
                         "CSV with label and prob columns")
      ->required();
  report_cmd->add_option("--out-dir", report.out_dir, "output directory")
      ->required();
  report_cmd->add_option("--threshold-grid", report.grid, "start:stop:step");
  report_cmd->add_option("--threshold", report.threshold,
                         "headline confusion threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (preprocess->parsed()) cmd_preprocess(pre);
    if (train_cmd->parsed()) cmd_train(train);
    if (online_cmd->parsed()) cmd_online(online);
    if (report_cmd->parsed()) cmd_report(report);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const CompatibilityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
