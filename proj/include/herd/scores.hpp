#pragma once

#include "herd/backend.hpp"
#include "herd/dataset.hpp"
#include "herd/metrics.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace herd::backends {

// Metric options applied when scoring completions: library defaults for
// every dataset, with per-dataset overrides (e.g. LAMBADA mandates all
// transforms on; that is already the default).
struct MetricConfig {
  metrics::NormalizationOptions defaults;
  std::map<std::string, metrics::NormalizationOptions> per_dataset;

  const metrics::NormalizationOptions& for_dataset(const std::string& dataset) const {
    auto it = per_dataset.find(dataset);
    return it == per_dataset.end() ? defaults : it->second;
  }
};

struct Provenance {
  std::string kind;
  std::string timestamp;
  metrics::NormalizationOptions metric_opts;
};

// Ground-truth grid: rows follow corpus order, columns follow herd order.
// A NaN cell marks an example/model pair skipped after backend failure in
// non-strict collection; analytics never impute, they drop the row.
struct ScoreMatrix {
  std::vector<std::string> example_ids;
  std::vector<std::string> model_ids;
  std::vector<double> size_b;  // aligned with model_ids
  std::vector<std::vector<double>> scores;
  std::map<std::string, Provenance> provenance;

  size_t rows() const { return example_ids.size(); }
  size_t cols() const { return model_ids.size(); }
  double at(size_t row, size_t col) const { return scores[row][col]; }
  bool complete() const;
  ScoreMatrix without_incomplete_rows() const;
  std::vector<double> model_means() const;  // over complete rows
};

void validate(const ScoreMatrix& matrix);

using CompleteFn =
    std::function<std::string(const ModelDescriptor&, const std::string& prompt)>;

struct CollectOptions {
  MetricConfig metrics;
  int parallelism = 4;
  // strict: any backend failure aborts the run. Otherwise the cell is
  // recorded as missing.
  bool strict = true;
  // JSONL log of raw completions; doubles as the resume journal.
  std::string progress_path;
  bool resume = false;
  // Provenance stamp; empty means current UTC time.
  std::string timestamp;
  CompletionOptions completion;
};

// The expensive ground-truth pass: every (example, model) cell is the F1 of
// the backend's completion against the reference. At most `parallelism`
// requests are in flight per backend; cells are assembled and journaled by
// a single writer in corpus order.
ScoreMatrix collect_scores(const data::Corpus& corpus,
                           const std::vector<ModelDescriptor>& herd,
                           const CollectOptions& opts = {}, CompleteFn complete_fn = {});

void save_matrix(const ScoreMatrix& matrix, const std::string& path);
ScoreMatrix load_matrix(const std::string& path);

std::string utc_timestamp();

}  // namespace herd::backends
