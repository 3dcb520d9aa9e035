#pragma once

#include "herd/scores.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace herd::triage {

// Thresholds behind the deficit analytics: a champion answer counts as wrong
// below 0.9 F1, a herd answer as correct above 0.95, and "beat" means an F1
// excess of more than 0.05.
inline constexpr double kBeatMargin = 0.05;
inline constexpr double kChampionWrongBelow = 0.90;
inline constexpr double kHerdCorrectAbove = 0.95;

// Linear utility score - lambda * size_b; ties go to the smaller model, then
// to the lexicographically smaller model_id.
struct SelectionPolicy {
  double lambda = 0.0;
};

void validate(const SelectionPolicy& policy);

// Index maximizing row[j] - lambda * sizes[j] under the fixed tie-break.
size_t route(std::span<const double> row, std::span<const double> sizes,
             std::span<const std::string> model_ids, double lambda);

// The oracle selector: argmax of true scores, no penalty.
size_t oracle_select(std::span<const double> row, std::span<const double> sizes,
                     std::span<const std::string> model_ids);

struct Allocation {
  std::vector<std::string> chosen;         // per-example model_id
  std::map<std::string, size_t> counts;    // model_id -> examples routed
};

Allocation allocate(const std::vector<std::vector<double>>& rows,
                    std::span<const double> sizes,
                    std::span<const std::string> model_ids, double lambda);

// Allocation-weighted mean model size in billions.
double effective_size(const std::map<std::string, size_t>& counts,
                      std::span<const std::string> model_ids,
                      std::span<const double> sizes);

struct TradeoffPoint {
  double lambda = 0.0;
  double mean_score = 0.0;       // mean TRUE score of the chosen models
  double effective_size_b = 0.0;
  std::map<std::string, size_t> counts;
};

// For each lambda in the ascending grid, routes every example on
// routing_rows (true scores or router predictions) and scores the choices
// against the truth matrix.
std::vector<TradeoffPoint> sweep_tradeoff(
    const std::vector<std::vector<double>>& routing_rows,
    const backends::ScoreMatrix& truths, const std::vector<double>& lambda_grid);

// Fraction of examples where the champion exceeds the herd score by more
// than the margin.
double beat_rate(std::span<const double> champion_scores,
                 std::span<const double> herd_scores, double margin = kBeatMargin);

// Restricted to examples the champion gets wrong (< kChampionWrongBelow):
// how often the herd (and the routed choice) is correct (> kHerdCorrectAbove),
// plus per-model mean F1s on that subset. Empty wrong-set yields nullopt
// markers, never zeros.
struct DeficitCoverage {
  size_t wrong_count = 0;
  std::optional<double> herd_coverage;
  std::optional<double> routed_coverage;   // requires predictions
  std::vector<double> per_model_mean;      // aligned with truths.model_ids
  std::optional<double> herd_best_mean;
  std::optional<double> routed_mean;
};

DeficitCoverage deficit_coverage(std::span<const double> champion_scores,
                                 const backends::ScoreMatrix& truths,
                                 const std::vector<std::vector<double>>* predictions = nullptr);

// Shannon entropy of the allocation counts in nats; zero counts contribute 0.
double routing_entropy(const std::map<std::string, size_t>& counts);

}  // namespace herd::triage
