#include "herd/reports.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace herd::reports {

using json = nlohmann::json;

std::string format_float(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", value);
  return buf;
}

TopicMatrix topic_matrix(const data::Corpus& corpus, const backends::ScoreMatrix& matrix) {
  std::map<std::string_view, size_t> row_of;
  for (size_t r = 0; r < matrix.rows(); ++r) row_of[matrix.example_ids[r]] = r;

  struct Accum {
    std::vector<double> sum;
    std::vector<double> exact;
    size_t support = 0;
  };
  std::map<std::string, Accum> by_topic;
  for (const data::Example& ex : corpus.examples) {
    auto it = row_of.find(ex.id);
    if (it == row_of.end()) {
      throw std::invalid_argument("example " + ex.id + " missing from score matrix");
    }
    const std::vector<double>& row = matrix.scores[it->second];
    if (std::any_of(row.begin(), row.end(), [](double v) { return std::isnan(v); })) {
      continue;  // incomplete rows are excluded, never imputed
    }
    Accum& acc = by_topic[ex.topic.empty() ? "untagged" : ex.topic];
    if (acc.sum.empty()) {
      acc.sum.assign(matrix.cols(), 0.0);
      acc.exact.assign(matrix.cols(), 0.0);
    }
    ++acc.support;
    for (size_t j = 0; j < matrix.cols(); ++j) {
      acc.sum[j] += row[j];
      if (row[j] >= 1.0) acc.exact[j] += 1.0;
    }
  }

  TopicMatrix out;
  out.model_ids = matrix.model_ids;
  for (auto& [topic, acc] : by_topic) {
    out.topics.push_back(topic);
    out.support.push_back(acc.support);
    std::vector<double> means(matrix.cols());
    std::vector<double> exact(matrix.cols());
    for (size_t j = 0; j < matrix.cols(); ++j) {
      means[j] = acc.sum[j] / static_cast<double>(acc.support);
      exact[j] = acc.exact[j] / static_cast<double>(acc.support);
    }
    out.mean_scores.push_back(std::move(means));
    out.exact_fraction.push_back(std::move(exact));
  }
  return out;
}

namespace {

std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double mean_a = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mean_b = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a <= 0.0 || var_b <= 0.0) return std::nullopt;
  return cov / std::sqrt(var_a * var_b);
}

// Average ranks with ties sharing the mean rank of their run.
std::vector<double> average_ranks(const std::vector<double>& values) {
  std::vector<size_t> order(values.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t i, size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(values.size());
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean_rank = static_cast<double>(i + j) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

Correlation correlate(const std::vector<double>& a, const std::vector<double>& b) {
  Correlation c;
  c.pearson = pearson(a, b);
  c.spearman = pearson(average_ranks(a), average_ranks(b));
  return c;
}

void open_or_throw(std::ofstream& out, const std::string& path) {
  out.open(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write report file: " + path);
}

std::string opt_str(const std::optional<double>& v) {
  return v.has_value() ? format_float(*v) : "na";
}

json opt_json(const std::optional<double>& v) {
  return v.has_value() ? json(*v) : json(nullptr);
}

}  // namespace

CorrelationReport prediction_correlation(const std::vector<std::vector<double>>& predictions,
                                         const backends::ScoreMatrix& truths) {
  if (predictions.size() != truths.rows()) {
    throw std::invalid_argument("predictions must align with the truth matrix");
  }
  if (predictions.size() < 3) {
    throw std::invalid_argument("correlation needs at least 3 examples");
  }
  CorrelationReport report;
  report.model_ids = truths.model_ids;
  std::vector<double> pooled_pred, pooled_truth;
  for (size_t j = 0; j < truths.cols(); ++j) {
    std::vector<double> pred_col, truth_col;
    pred_col.reserve(truths.rows());
    truth_col.reserve(truths.rows());
    for (size_t i = 0; i < truths.rows(); ++i) {
      if (predictions[i].size() != truths.cols()) {
        throw std::invalid_argument("prediction row width does not match model count");
      }
      pred_col.push_back(predictions[i][j]);
      truth_col.push_back(truths.at(i, j));
      pooled_pred.push_back(predictions[i][j]);
      pooled_truth.push_back(truths.at(i, j));
    }
    report.per_model.push_back(correlate(pred_col, truth_col));
  }
  report.pooled = correlate(pooled_pred, pooled_truth);
  return report;
}

EvaluationSummary summarize(const backends::ScoreMatrix& truths,
                            const std::vector<std::vector<double>>& predictions,
                            double lambda,
                            const std::vector<double>* champion) {
  backends::validate(truths);
  if (!truths.complete()) {
    throw std::invalid_argument("truth matrix has missing cells; drop incomplete rows first");
  }
  if (predictions.size() != truths.rows() || predictions.empty()) {
    throw std::invalid_argument("predictions must align with the truth matrix");
  }
  if (champion != nullptr && champion->size() != truths.rows()) {
    throw std::invalid_argument("champion scores must align with the truth matrix");
  }

  EvaluationSummary s;
  s.examples = truths.rows();
  s.lambda = lambda;
  s.model_ids = truths.model_ids;
  s.size_b = truths.size_b;
  s.model_means = truths.model_means();

  double oracle_total = 0.0;
  double routed_total = 0.0;
  std::vector<double> routed_scores(truths.rows());
  std::vector<double> herd_best(truths.rows());
  for (size_t i = 0; i < truths.rows(); ++i) {
    const size_t oracle_j = triage::oracle_select(truths.scores[i], truths.size_b,
                                                  truths.model_ids);
    const size_t routed_j = triage::route(predictions[i], truths.size_b,
                                          truths.model_ids, lambda);
    herd_best[i] = truths.at(i, oracle_j);
    routed_scores[i] = truths.at(i, routed_j);
    oracle_total += herd_best[i];
    routed_total += routed_scores[i];
    ++s.allocation_counts[truths.model_ids[routed_j]];
  }
  s.oracle_mean = oracle_total / static_cast<double>(truths.rows());
  s.routed_mean = routed_total / static_cast<double>(truths.rows());

  const size_t best_j = triage::route(s.model_means, s.size_b, s.model_ids, 0.0);
  s.best_model_id = s.model_ids[best_j];
  s.best_model_mean = s.model_means[best_j];

  s.routing_entropy_nats = triage::routing_entropy(s.allocation_counts);
  s.effective_size_b = triage::effective_size(s.allocation_counts, s.model_ids, s.size_b);

  if (truths.rows() >= 3) {
    s.pooled_correlation = prediction_correlation(predictions, truths).pooled;
  }

  if (champion != nullptr) {
    ChampionAnalytics c;
    c.mean_score = std::accumulate(champion->begin(), champion->end(), 0.0) /
                   static_cast<double>(champion->size());
    c.beat_rate_vs_herd_best = triage::beat_rate(*champion, herd_best);
    c.beat_rate_vs_routed = triage::beat_rate(*champion, routed_scores);
    c.deficit = triage::deficit_coverage(*champion, truths, &predictions);
    s.champion = std::move(c);
  }
  return s;
}

json summary_to_json(const EvaluationSummary& s) {
  json models = json::array();
  for (size_t j = 0; j < s.model_ids.size(); ++j) {
    const auto it = s.allocation_counts.find(s.model_ids[j]);
    models.push_back(json{{"model_id", s.model_ids[j]},
                          {"size_b", s.size_b[j]},
                          {"mean_score", s.model_means[j]},
                          {"routed_count", it == s.allocation_counts.end() ? 0 : it->second}});
  }
  json doc{{"examples", s.examples},
           {"lambda", s.lambda},
           {"models", models},
           {"oracle_mean", s.oracle_mean},
           {"routed_mean", s.routed_mean},
           {"best_model", json{{"model_id", s.best_model_id}, {"mean_score", s.best_model_mean}}},
           {"routing_entropy_nats", s.routing_entropy_nats},
           {"effective_size_b", s.effective_size_b},
           {"correlations", json{{"pooled", json{{"pearson", opt_json(s.pooled_correlation.pearson)},
                                                 {"spearman", opt_json(s.pooled_correlation.spearman)}}}}}};
  if (s.champion.has_value()) {
    const ChampionAnalytics& c = *s.champion;
    json per_model = json::object();
    for (size_t j = 0; j < c.deficit.per_model_mean.size(); ++j) {
      per_model[s.model_ids[j]] = c.deficit.per_model_mean[j];
    }
    doc["champion"] = json{
        {"mean_score", c.mean_score},
        {"beat_rate_vs_herd_best", c.beat_rate_vs_herd_best},
        {"beat_rate_vs_routed", c.beat_rate_vs_routed},
        {"deficit", json{{"wrong_count", c.deficit.wrong_count},
                         {"herd_coverage", opt_json(c.deficit.herd_coverage)},
                         {"routed_coverage", opt_json(c.deficit.routed_coverage)},
                         {"herd_best_mean", opt_json(c.deficit.herd_best_mean)},
                         {"routed_mean", opt_json(c.deficit.routed_mean)},
                         {"per_model_mean", per_model}}}};
  }
  return doc;
}

void write_tradeoff_csv(const std::vector<triage::TradeoffPoint>& points,
                        const std::vector<std::string>& model_ids,
                        const std::string& path) {
  std::ofstream out;
  open_or_throw(out, path);
  out << "lambda,mean_f1,effective_size_b";
  for (const std::string& id : model_ids) out << ',' << id;
  out << '\n';
  for (const auto& p : points) {
    out << format_float(p.lambda) << ',' << format_float(p.mean_score) << ','
        << format_float(p.effective_size_b);
    for (const std::string& id : model_ids) {
      const auto it = p.counts.find(id);
      out << ',' << (it == p.counts.end() ? 0 : it->second);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void emit_report(const ReportBundle& bundle, const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  const auto dir = std::filesystem::path(out_dir);

  {
    std::ofstream out;
    open_or_throw(out, (dir / "topic_matrix.csv").string());
    out << "topic,support";
    for (const auto& id : bundle.topics.model_ids) out << ",mean:" << id;
    for (const auto& id : bundle.topics.model_ids) out << ",exact:" << id;
    out << '\n';
    for (size_t t = 0; t < bundle.topics.topics.size(); ++t) {
      out << bundle.topics.topics[t] << ',' << bundle.topics.support[t];
      for (double v : bundle.topics.mean_scores[t]) out << ',' << format_float(v);
      for (double v : bundle.topics.exact_fraction[t]) out << ',' << format_float(v);
      out << '\n';
    }
  }

  write_tradeoff_csv(bundle.tradeoff, bundle.summary.model_ids,
                     (dir / "tradeoff.csv").string());

  {
    std::ofstream out;
    open_or_throw(out, (dir / "allocation.csv").string());
    out << "model_id,size_b,count,fraction\n";
    size_t total = 0;
    for (const auto& [id, count] : bundle.allocation.counts) total += count;
    for (size_t j = 0; j < bundle.summary.model_ids.size(); ++j) {
      const std::string& id = bundle.summary.model_ids[j];
      const auto it = bundle.allocation.counts.find(id);
      const size_t count = it == bundle.allocation.counts.end() ? 0 : it->second;
      out << id << ',' << format_float(bundle.summary.size_b[j]) << ',' << count << ','
          << format_float(total == 0 ? 0.0 : static_cast<double>(count) / total) << '\n';
    }
  }

  {
    std::ofstream out;
    open_or_throw(out, (dir / "correlations.csv").string());
    out << "scope,pearson,spearman\n";
    out << "pooled," << opt_str(bundle.correlations.pooled.pearson) << ','
        << opt_str(bundle.correlations.pooled.spearman) << '\n';
    for (size_t j = 0; j < bundle.correlations.model_ids.size(); ++j) {
      out << bundle.correlations.model_ids[j] << ','
          << opt_str(bundle.correlations.per_model[j].pearson) << ','
          << opt_str(bundle.correlations.per_model[j].spearman) << '\n';
    }
  }

  {
    std::ofstream out;
    open_or_throw(out, (dir / "summary.json").string());
    out << summary_to_json(bundle.summary).dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + (dir / "summary.json").string());
  }
}

}  // namespace herd::reports
