#include "herd/triage.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace herd::triage {

void validate(const SelectionPolicy& policy) {
  if (!(policy.lambda >= 0.0) || !std::isfinite(policy.lambda)) {
    throw std::invalid_argument("lambda must be finite and >= 0");
  }
}

size_t route(std::span<const double> row, std::span<const double> sizes,
             std::span<const std::string> model_ids, double lambda) {
  if (row.empty()) throw std::invalid_argument("selection row must be non-empty");
  if (row.size() != sizes.size() || row.size() != model_ids.size()) {
    throw std::invalid_argument("selection row, sizes and model_ids must align");
  }
  size_t best = 0;
  double best_utility = row[0] - lambda * sizes[0];
  for (size_t j = 1; j < row.size(); ++j) {
    const double utility = row[j] - lambda * sizes[j];
    const bool wins = utility > best_utility ||
                      (utility == best_utility &&
                       (sizes[j] < sizes[best] ||
                        (sizes[j] == sizes[best] && model_ids[j] < model_ids[best])));
    if (wins) {
      best = j;
      best_utility = utility;
    }
  }
  return best;
}

size_t oracle_select(std::span<const double> row, std::span<const double> sizes,
                     std::span<const std::string> model_ids) {
  return route(row, sizes, model_ids, 0.0);
}

Allocation allocate(const std::vector<std::vector<double>>& rows,
                    std::span<const double> sizes,
                    std::span<const std::string> model_ids, double lambda) {
  Allocation out;
  out.chosen.reserve(rows.size());
  for (const auto& row : rows) {
    const size_t j = route(row, sizes, model_ids, lambda);
    out.chosen.push_back(model_ids[j]);
    ++out.counts[model_ids[j]];
  }
  return out;
}

double effective_size(const std::map<std::string, size_t>& counts,
                      std::span<const std::string> model_ids,
                      std::span<const double> sizes) {
  double weighted = 0.0;
  size_t total = 0;
  for (const auto& [model_id, count] : counts) {
    if (count == 0) continue;
    const auto it = std::find(model_ids.begin(), model_ids.end(), model_id);
    if (it == model_ids.end()) {
      throw std::invalid_argument("allocation references unknown model: " + model_id);
    }
    weighted += static_cast<double>(count) * sizes[it - model_ids.begin()];
    total += count;
  }
  if (total == 0) throw std::invalid_argument("allocation is empty");
  return weighted / static_cast<double>(total);
}

std::vector<TradeoffPoint> sweep_tradeoff(
    const std::vector<std::vector<double>>& routing_rows,
    const backends::ScoreMatrix& truths, const std::vector<double>& lambda_grid) {
  if (lambda_grid.empty()) throw std::invalid_argument("lambda grid must be non-empty");
  for (size_t i = 0; i < lambda_grid.size(); ++i) {
    if (!(lambda_grid[i] >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
    if (i > 0 && lambda_grid[i] <= lambda_grid[i - 1]) {
      throw std::invalid_argument("lambda grid must be strictly ascending");
    }
  }
  if (routing_rows.size() != truths.rows() || routing_rows.empty()) {
    throw std::invalid_argument("routing rows must align with the truth matrix");
  }

  std::vector<TradeoffPoint> points;
  points.reserve(lambda_grid.size());
  for (double lambda : lambda_grid) {
    TradeoffPoint point;
    point.lambda = lambda;
    double total = 0.0;
    for (size_t i = 0; i < routing_rows.size(); ++i) {
      const size_t j = route(routing_rows[i], truths.size_b, truths.model_ids, lambda);
      total += truths.at(i, j);
      ++point.counts[truths.model_ids[j]];
    }
    point.mean_score = total / static_cast<double>(routing_rows.size());
    point.effective_size_b = effective_size(point.counts, truths.model_ids, truths.size_b);
    points.push_back(std::move(point));
  }
  return points;
}

double beat_rate(std::span<const double> champion_scores,
                 std::span<const double> herd_scores, double margin) {
  if (champion_scores.size() != herd_scores.size()) {
    throw std::invalid_argument("beat_rate inputs must have equal length");
  }
  if (champion_scores.empty()) throw std::invalid_argument("beat_rate needs examples");
  size_t beats = 0;
  for (size_t i = 0; i < champion_scores.size(); ++i) {
    if (champion_scores[i] > herd_scores[i] + margin) ++beats;
  }
  return static_cast<double>(beats) / static_cast<double>(champion_scores.size());
}

DeficitCoverage deficit_coverage(std::span<const double> champion_scores,
                                 const backends::ScoreMatrix& truths,
                                 const std::vector<std::vector<double>>* predictions) {
  if (champion_scores.size() != truths.rows()) {
    throw std::invalid_argument("champion scores must align with the truth matrix");
  }
  if (predictions != nullptr && predictions->size() != truths.rows()) {
    throw std::invalid_argument("predictions must align with the truth matrix");
  }

  DeficitCoverage out;
  std::vector<double> model_sums(truths.cols(), 0.0);
  size_t herd_correct = 0;
  size_t routed_correct = 0;
  double herd_best_sum = 0.0;
  double routed_sum = 0.0;

  for (size_t i = 0; i < truths.rows(); ++i) {
    if (!(champion_scores[i] < kChampionWrongBelow)) continue;
    ++out.wrong_count;
    double best = 0.0;
    for (size_t j = 0; j < truths.cols(); ++j) {
      model_sums[j] += truths.at(i, j);
      best = std::max(best, truths.at(i, j));
    }
    herd_best_sum += best;
    if (best > kHerdCorrectAbove) ++herd_correct;
    if (predictions != nullptr) {
      const size_t j = route((*predictions)[i], truths.size_b, truths.model_ids, 0.0);
      routed_sum += truths.at(i, j);
      if (truths.at(i, j) > kHerdCorrectAbove) ++routed_correct;
    }
  }

  if (out.wrong_count == 0) return out;  // coverages stay not-applicable

  const double denom = static_cast<double>(out.wrong_count);
  out.herd_coverage = static_cast<double>(herd_correct) / denom;
  out.herd_best_mean = herd_best_sum / denom;
  out.per_model_mean.resize(truths.cols());
  for (size_t j = 0; j < truths.cols(); ++j) out.per_model_mean[j] = model_sums[j] / denom;
  if (predictions != nullptr) {
    out.routed_coverage = static_cast<double>(routed_correct) / denom;
    out.routed_mean = routed_sum / denom;
  }
  return out;
}

double routing_entropy(const std::map<std::string, size_t>& counts) {
  size_t total = 0;
  for (const auto& [model_id, count] : counts) total += count;
  if (total == 0) throw std::invalid_argument("allocation is empty");
  double entropy = 0.0;
  for (const auto& [model_id, count] : counts) {
    if (count == 0) continue;
    const double p = static_cast<double>(count) / static_cast<double>(total);
    entropy -= p * std::log(p);
  }
  return entropy;
}

}  // namespace herd::triage
