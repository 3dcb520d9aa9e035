#pragma once

#include "herd/scores.hpp"
#include "herd/triage.hpp"

#include <optional>
#include <string>
#include <vector>

namespace herd::reports {

// Mean score per (topic, model), the data behind the by-topic clustermaps.
// Examples with an empty topic tag group under "untagged". Alongside the raw
// means, exact_fraction holds the share of cells at exactly 1.0 (verbatim
// match after normalization), since it is unclear whether such views should
// binarize; both are exported.
struct TopicMatrix {
  std::vector<std::string> topics;  // sorted
  std::vector<std::string> model_ids;
  std::vector<std::vector<double>> mean_scores;     // topics x models
  std::vector<std::vector<double>> exact_fraction;  // topics x models
  std::vector<size_t> support;                      // examples per topic
};

TopicMatrix topic_matrix(const data::Corpus& corpus, const backends::ScoreMatrix& matrix);

struct Correlation {
  std::optional<double> pearson;   // nullopt when either side has no variance
  std::optional<double> spearman;  // average-rank ties
};

struct CorrelationReport {
  std::vector<std::string> model_ids;
  std::vector<Correlation> per_model;
  Correlation pooled;  // over the flattened grid
};

// Requires >= 3 examples and axes aligned with the truth matrix.
CorrelationReport prediction_correlation(const std::vector<std::vector<double>>& predictions,
                                         const backends::ScoreMatrix& truths);

struct ChampionAnalytics {
  double mean_score = 0.0;
  double beat_rate_vs_herd_best = 0.0;
  double beat_rate_vs_routed = 0.0;
  triage::DeficitCoverage deficit;
};

struct EvaluationSummary {
  size_t examples = 0;
  double lambda = 0.0;
  std::vector<std::string> model_ids;
  std::vector<double> size_b;
  std::vector<double> model_means;
  double oracle_mean = 0.0;
  double routed_mean = 0.0;
  std::string best_model_id;
  double best_model_mean = 0.0;
  double routing_entropy_nats = 0.0;
  double effective_size_b = 0.0;
  std::map<std::string, size_t> allocation_counts;
  Correlation pooled_correlation;
  std::optional<ChampionAnalytics> champion;
};

// Core comparison statistics for one evaluation run. The truth matrix must
// be complete (drop incomplete rows first); predictions and the optional
// champion column align with its rows.
EvaluationSummary summarize(const backends::ScoreMatrix& truths,
                            const std::vector<std::vector<double>>& predictions,
                            double lambda,
                            const std::vector<double>* champion = nullptr);

nlohmann::json summary_to_json(const EvaluationSummary& summary);

struct ReportBundle {
  TopicMatrix topics;
  std::vector<triage::TradeoffPoint> tradeoff;
  triage::Allocation allocation;
  CorrelationReport correlations;
  EvaluationSummary summary;
};

// Writes topic_matrix.csv, tradeoff.csv, allocation.csv, correlations.csv and
// summary.json into out_dir. Byte-deterministic given identical inputs.
void emit_report(const ReportBundle& bundle, const std::string& out_dir);

void write_tradeoff_csv(const std::vector<triage::TradeoffPoint>& points,
                        const std::vector<std::string>& model_ids,
                        const std::string& path);

// 6 significant digits, the float rendering shared by every CSV.
std::string format_float(double value);

}  // namespace herd::reports
