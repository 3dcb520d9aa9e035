// herd - one binary driving the pipeline:
//   ingest -> score -> train -> evaluate -> tradeoff -> serve
//
// Exit codes: 0 success, 1 validation/usage error, 2 runtime failure.

#include "herd/dataset.hpp"
#include "herd/reports.hpp"
#include "herd/router.hpp"
#include "herd/scores.hpp"
#include "herd/service.hpp"
#include "herd/triage.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace {

using namespace herd;

constexpr const char* kDefaultLambdaGrid =
    "0,1e-05,2e-05,5e-05,0.0001,0.0002,0.0005,0.001,0.002,0.005,0.01,0.02,0.05,0.1";

std::vector<double> parse_lambda_grid(const std::string& csv) {
  std::vector<double> grid;
  size_t start = 0;
  while (start <= csv.size()) {
    const size_t comma = csv.find(',', start);
    const std::string item =
        csv.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) {
      size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument("bad lambda value: " + item);
      grid.push_back(v);
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (grid.empty()) throw std::invalid_argument("lambda grid is empty");
  return grid;
}

// Corpus examples paired with their truth rows, in corpus order. Rows with
// missing cells are dropped, never imputed.
struct AlignedData {
  data::Corpus corpus;
  backends::ScoreMatrix truths;
  size_t dropped = 0;
};

AlignedData align(const data::Corpus& corpus, const backends::ScoreMatrix& matrix) {
  std::map<std::string_view, size_t> row_of;
  for (size_t r = 0; r < matrix.rows(); ++r) row_of[matrix.example_ids[r]] = r;
  AlignedData out;
  out.truths.model_ids = matrix.model_ids;
  out.truths.size_b = matrix.size_b;
  out.truths.provenance = matrix.provenance;
  for (const data::Example& ex : corpus.examples) {
    const auto it = row_of.find(ex.id);
    if (it == row_of.end()) {
      throw std::invalid_argument("example " + ex.id + " missing from score matrix");
    }
    const auto& row = matrix.scores[it->second];
    if (std::any_of(row.begin(), row.end(), [](double v) { return std::isnan(v); })) {
      ++out.dropped;
      continue;
    }
    out.corpus.examples.push_back(ex);
    out.truths.example_ids.push_back(ex.id);
    out.truths.scores.push_back(row);
  }
  if (out.corpus.examples.empty()) {
    throw std::invalid_argument("no complete examples to evaluate");
  }
  return out;
}

std::vector<std::vector<double>> predict_rows(const router::RouterModel& model,
                                              const data::Corpus& corpus) {
  std::vector<std::vector<double>> rows;
  rows.reserve(corpus.examples.size());
  for (const data::Example& ex : corpus.examples) {
    rows.push_back(router::predict(model, ex.prompt));
  }
  return rows;
}

data::Corpus apply_split(const data::Corpus& corpus, const std::string& split,
                         double train_fraction) {
  if (split == "all") return corpus;
  auto [train, validation] = data::split_corpus(corpus, train_fraction);
  if (split == "train") return train;
  if (split == "validation") return validation;
  throw std::invalid_argument("unknown split: " + split);
}

// Champion scores aligned to the evaluated corpus: first column of a
// herd-scores file covering every evaluated example.
std::vector<double> load_champion(const std::string& path, const data::Corpus& corpus) {
  const backends::ScoreMatrix champion = backends::load_matrix(path);
  std::map<std::string_view, double> by_id;
  for (size_t r = 0; r < champion.rows(); ++r) {
    const double v = champion.at(r, 0);
    if (!std::isnan(v)) by_id[champion.example_ids[r]] = v;
  }
  std::vector<double> out;
  out.reserve(corpus.examples.size());
  for (const data::Example& ex : corpus.examples) {
    const auto it = by_id.find(ex.id);
    if (it == by_id.end()) {
      throw std::invalid_argument("champion file lacks example " + ex.id);
    }
    out.push_back(it->second);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct IngestArgs {
  std::string dataset, input, output;
  std::string train_out, val_out;
  double train_fraction = data::kDefaultTrainFraction;
  bool lax = false;
};

int cmd_ingest(const IngestArgs& args) {
  if (!data::known_dataset(args.dataset)) {
    throw std::invalid_argument("unknown dataset tag: " + args.dataset);
  }
  const auto records = data::load_records(args.input);
  const data::AdaptResult result = data::adapt(args.dataset, records, !args.lax);
  data::Corpus corpus;
  corpus.examples = result.examples;
  data::save_corpus(corpus, args.output);
  std::printf("ingested %zu records -> %zu examples (%zu skipped)\n", records.size(),
              result.examples.size(), result.skipped.size());
  for (const data::SkipReport& skip : result.skipped) {
    std::printf("  skipped %s: %s\n", skip.record_id.c_str(), skip.reason.c_str());
  }
  if (!args.train_out.empty() || !args.val_out.empty()) {
    if (args.train_out.empty() || args.val_out.empty()) {
      throw std::invalid_argument("--train-out and --val-out must be used together");
    }
    auto [train, validation] = data::split_corpus(corpus, args.train_fraction);
    data::save_corpus(train, args.train_out);
    data::save_corpus(validation, args.val_out);
    std::printf("split %zu train / %zu validation\n", train.examples.size(),
                validation.examples.size());
  }
  return 0;
}

struct ScoreArgs {
  std::string corpus, config, output, log, stamp;
  int parallelism = 0;  // 0 means take the config value
  bool resume = false;
  bool lax = false;
};

int cmd_score(const ScoreArgs& args) {
  const data::Corpus corpus = data::load_corpus(args.corpus);
  const service::HerdConfig config = service::load_config(args.config);
  backends::CollectOptions opts;
  opts.metrics = config.metrics;
  opts.parallelism = args.parallelism > 0 ? args.parallelism : config.parallelism;
  opts.strict = !args.lax;
  opts.progress_path = args.log.empty() ? args.output + ".completions.jsonl" : args.log;
  opts.resume = args.resume;
  opts.timestamp = args.stamp;
  opts.completion = config.completion;
  const backends::ScoreMatrix matrix = backends::collect_scores(corpus, config.herd, opts);
  backends::save_matrix(matrix, args.output);
  const auto means = matrix.model_means();
  std::printf("scored %zu examples x %zu models -> %s\n", matrix.rows(), matrix.cols(),
              args.output.c_str());
  for (size_t j = 0; j < matrix.cols(); ++j) {
    std::printf("  %-20s mean %s\n", matrix.model_ids[j].c_str(),
                reports::format_float(means[j]).c_str());
  }
  return 0;
}

struct TrainArgs {
  std::string corpus, matrix, output, trace;
  router::TrainConfig config;
  std::string optimizer = "adam";
};

int cmd_train(const TrainArgs& args) {
  data::Corpus corpus = data::load_corpus(args.corpus);
  const backends::ScoreMatrix matrix = backends::load_matrix(args.matrix);
  router::TrainConfig cfg = args.config;
  cfg.optimizer = router::optimizer_from_string(args.optimizer);
  const router::TrainResult result = router::train(corpus, matrix, cfg);
  router::save_router(result.model, args.output);
  if (!args.trace.empty()) {
    std::ofstream out(args.trace, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write trace file: " + args.trace);
    out << "epoch,train_loss,validation_loss\n";
    for (const auto& stats : result.trace) {
      out << stats.epoch << ',' << reports::format_float(stats.train_loss) << ','
          << reports::format_float(stats.validation_loss) << '\n';
    }
  }
  const auto& best = result.trace[result.best_epoch - 1];
  std::printf("trained %zu epochs; best epoch %zu (train %s, validation %s) -> %s\n",
              cfg.epochs, result.best_epoch,
              reports::format_float(best.train_loss).c_str(),
              reports::format_float(best.validation_loss).c_str(), args.output.c_str());
  return 0;
}

struct EvaluateArgs {
  std::string corpus, matrix, router_path, champion, out_dir;
  std::string split = "all";
  std::string lambdas = kDefaultLambdaGrid;
  double lambda = 0.0;
  double train_fraction = data::kDefaultTrainFraction;
};

int cmd_evaluate(const EvaluateArgs& args) {
  const data::Corpus full_corpus = data::load_corpus(args.corpus);
  const backends::ScoreMatrix matrix = backends::load_matrix(args.matrix);
  const router::RouterModel model = router::load_router(args.router_path);
  if (model.model_ids != matrix.model_ids) {
    throw std::invalid_argument("router and matrix disagree on the herd roster");
  }

  const data::Corpus selected = apply_split(full_corpus, args.split, args.train_fraction);
  AlignedData aligned = align(selected, matrix);
  if (aligned.dropped > 0) {
    std::printf("dropped %zu incomplete rows\n", aligned.dropped);
  }
  const auto predictions = predict_rows(model, aligned.corpus);

  std::vector<double> champion;
  const bool with_champion = !args.champion.empty();
  if (with_champion) champion = load_champion(args.champion, aligned.corpus);

  reports::ReportBundle bundle;
  bundle.summary = reports::summarize(aligned.truths, predictions, args.lambda,
                                      with_champion ? &champion : nullptr);
  bundle.topics = reports::topic_matrix(aligned.corpus, aligned.truths);
  bundle.tradeoff =
      triage::sweep_tradeoff(predictions, aligned.truths, parse_lambda_grid(args.lambdas));
  bundle.allocation = triage::allocate(predictions, aligned.truths.size_b,
                                       aligned.truths.model_ids, args.lambda);
  bundle.correlations = reports::prediction_correlation(predictions, aligned.truths);
  reports::emit_report(bundle, args.out_dir);

  const auto& s = bundle.summary;
  std::printf("evaluated %zu examples (split=%s, lambda=%s)\n", s.examples,
              args.split.c_str(), reports::format_float(s.lambda).c_str());
  std::printf("  oracle mean      %s\n", reports::format_float(s.oracle_mean).c_str());
  std::printf("  routed mean      %s\n", reports::format_float(s.routed_mean).c_str());
  std::printf("  best single      %s (%s)\n", s.best_model_id.c_str(),
              reports::format_float(s.best_model_mean).c_str());
  std::printf("  effective size   %sB\n", reports::format_float(s.effective_size_b).c_str());
  std::printf("  routing entropy  %s nats\n",
              reports::format_float(s.routing_entropy_nats).c_str());
  if (s.champion.has_value()) {
    std::printf("  champion mean    %s\n",
                reports::format_float(s.champion->mean_score).c_str());
    std::printf("  beat rate        %s (vs herd best), %s (vs routed)\n",
                reports::format_float(s.champion->beat_rate_vs_herd_best).c_str(),
                reports::format_float(s.champion->beat_rate_vs_routed).c_str());
  }
  std::printf("report written to %s\n", args.out_dir.c_str());
  return 0;
}

struct TradeoffArgs {
  std::string matrix, corpus, router_path, output;
  std::string lambdas = kDefaultLambdaGrid;
  std::string split = "all";
  double train_fraction = data::kDefaultTrainFraction;
};

int cmd_tradeoff(const TradeoffArgs& args) {
  const backends::ScoreMatrix matrix = backends::load_matrix(args.matrix);
  const std::vector<double> grid = parse_lambda_grid(args.lambdas);

  std::vector<triage::TradeoffPoint> points;
  std::vector<std::string> model_ids = matrix.model_ids;
  if (!args.router_path.empty()) {
    if (args.corpus.empty()) {
      throw std::invalid_argument("--router requires --corpus for prompts");
    }
    const router::RouterModel model = router::load_router(args.router_path);
    if (model.model_ids != matrix.model_ids) {
      throw std::invalid_argument("router and matrix disagree on the herd roster");
    }
    const data::Corpus corpus = apply_split(data::load_corpus(args.corpus), args.split,
                                            args.train_fraction);
    AlignedData aligned = align(corpus, matrix);
    points = triage::sweep_tradeoff(predict_rows(model, aligned.corpus), aligned.truths, grid);
  } else {
    // Manual argmaxing: route on the true scores themselves.
    const backends::ScoreMatrix complete = matrix.without_incomplete_rows();
    points = triage::sweep_tradeoff(complete.scores, complete, grid);
  }
  reports::write_tradeoff_csv(points, model_ids, args.output);
  std::printf("tradeoff sweep over %zu lambdas -> %s\n", grid.size(), args.output.c_str());
  return 0;
}

struct ServeArgs {
  std::string config, router_path;
};

int cmd_serve(const ServeArgs& args) {
  service::HerdConfig config = service::load_config(args.config);
  const std::string router_path =
      args.router_path.empty() ? config.router_path : args.router_path;
  if (router_path.empty()) {
    throw std::invalid_argument("no router_path in config and no --router given");
  }
  router::RouterModel model = router::load_router(router_path);
  return service::run_server(std::move(config), std::move(model));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"herd - route queries across a herd of text-generation backends"};
  app.require_subcommand(1);

  IngestArgs ingest;
  CLI::App* ingest_cmd = app.add_subcommand(
      "ingest", "Adapt raw benchmark records into a canonical corpus");
  ingest_cmd->add_option("--dataset", ingest.dataset,
                         "mmlu|truthfulqa|gsm8k|lambada|dolly|sciq|passthrough")
      ->required();
  ingest_cmd->add_option("--input", ingest.input, "raw records (JSONL or JSON array)")
      ->required();
  ingest_cmd->add_option("--output", ingest.output, "corpus file to write")->required();
  ingest_cmd->add_flag("--lax", ingest.lax, "skip malformed records instead of aborting");
  ingest_cmd->add_option("--train-out", ingest.train_out, "also write a train split");
  ingest_cmd->add_option("--val-out", ingest.val_out, "also write a validation split");
  ingest_cmd->add_option("--train-fraction", ingest.train_fraction,
                         "train share of the hash split");

  ScoreArgs score;
  CLI::App* score_cmd =
      app.add_subcommand("score", "Collect the ground-truth score matrix");
  score_cmd->add_option("--corpus", score.corpus, "corpus file")->required();
  score_cmd->add_option("--config", score.config, "herd config JSON")->required();
  score_cmd->add_option("--output", score.output, "score matrix file to write")->required();
  score_cmd->add_option("--parallelism", score.parallelism,
                        "max in-flight requests per backend");
  score_cmd->add_option("--log", score.log, "completion journal path");
  score_cmd->add_option("--stamp", score.stamp, "provenance timestamp override");
  score_cmd->add_flag("--resume", score.resume, "skip cells already in the journal");
  score_cmd->add_flag("--lax", score.lax, "record failed cells as missing");

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "Fit the routing predictor");
  train_cmd->add_option("--corpus", train.corpus, "corpus file")->required();
  train_cmd->add_option("--matrix", train.matrix, "score matrix file")->required();
  train_cmd->add_option("--output", train.output, "router file to write")->required();
  train_cmd->add_option("--trace", train.trace, "per-epoch loss CSV");
  train_cmd->add_option("--epochs", train.config.epochs, "training epochs");
  train_cmd->add_option("--batch-size", train.config.batch_size, "mini-batch size");
  train_cmd->add_option("--lr", train.config.learning_rate, "learning rate");
  train_cmd->add_option("--optimizer", train.optimizer, "sgd|adam");
  train_cmd->add_option("--seed", train.config.seed, "shuffling seed");
  train_cmd->add_option("--l2", train.config.l2, "ridge coefficient");
  train_cmd->add_option("--k", train.config.k, "hashing width exponent");
  train_cmd->add_option("--train-fraction", train.config.train_fraction,
                        "train share of the hash split");

  EvaluateArgs evaluate;
  CLI::App* eval_cmd =
      app.add_subcommand("evaluate", "Oracle/routed/champion analytics and report bundle");
  eval_cmd->add_option("--corpus", evaluate.corpus, "corpus file")->required();
  eval_cmd->add_option("--matrix", evaluate.matrix, "score matrix file")->required();
  eval_cmd->add_option("--router", evaluate.router_path, "router file")->required();
  eval_cmd->add_option("--champion", evaluate.champion,
                       "single-column score matrix of an external champion");
  eval_cmd->add_option("--out-dir", evaluate.out_dir, "report directory")->required();
  eval_cmd->add_option("--lambda", evaluate.lambda, "size penalty for routing");
  eval_cmd->add_option("--split", evaluate.split, "all|train|validation");
  eval_cmd->add_option("--lambdas", evaluate.lambdas, "grid for tradeoff.csv");
  eval_cmd->add_option("--train-fraction", evaluate.train_fraction,
                       "train share of the hash split");

  TradeoffArgs tradeoff;
  CLI::App* tradeoff_cmd =
      app.add_subcommand("tradeoff", "Sweep the size penalty and export the curve");
  tradeoff_cmd->add_option("--matrix", tradeoff.matrix, "score matrix file")->required();
  tradeoff_cmd->add_option("--corpus", tradeoff.corpus, "corpus file (with --router)");
  tradeoff_cmd->add_option("--router", tradeoff.router_path,
                           "route on router predictions instead of true scores");
  tradeoff_cmd->add_option("--output", tradeoff.output, "CSV to write")->required();
  tradeoff_cmd->add_option("--lambdas", tradeoff.lambdas, "comma-separated ascending grid");
  tradeoff_cmd->add_option("--split", tradeoff.split, "all|train|validation");
  tradeoff_cmd->add_option("--train-fraction", tradeoff.train_fraction,
                           "train share of the hash split");

  ServeArgs serve;
  CLI::App* serve_cmd = app.add_subcommand("serve", "Run the online routing endpoint");
  serve_cmd->add_option("--config", serve.config, "herd config JSON")->required();
  serve_cmd->add_option("--router", serve.router_path, "router file override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (ingest_cmd->parsed()) return cmd_ingest(ingest);
    if (score_cmd->parsed()) return cmd_score(score);
    if (train_cmd->parsed()) return cmd_train(train);
    if (eval_cmd->parsed()) return cmd_evaluate(evaluate);
    if (tradeoff_cmd->parsed()) return cmd_tradeoff(tradeoff);
    if (serve_cmd->parsed()) return cmd_serve(serve);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
