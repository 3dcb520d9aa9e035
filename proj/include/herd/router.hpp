#pragma once

#include "herd/dataset.hpp"
#include "herd/scores.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace herd::router {

inline constexpr uint32_t kMinHashBits = 8;
inline constexpr uint32_t kMaxHashBits = 26;
inline constexpr uint32_t kDefaultHashBits = 18;

// 2e-5 is the usual fine-tuning rate when a transformer encoder sits behind
// the predictor interface; the hashed linear predictor trains at 0.1.
inline constexpr double kTransformerLearningRate = 2e-5;
inline constexpr double kDefaultLearningRate = 0.1;

// Sparse prompt features. Index 0 is the bias slot, always present with
// value 1.0; hashed n-gram buckets occupy [1, 2^k).
struct FeatureVector {
  uint32_t k = kDefaultHashBits;
  std::vector<uint32_t> indices;  // strictly increasing
  std::vector<double> values;

  bool operator==(const FeatureVector&) const = default;
};

using NgramCounts = std::map<std::string, double>;

// Lowercased word unigrams plus adjacent-pair bigrams (bigrams joined with a
// space; self-pairs like "cat cat" are skipped so repeated words contribute
// only their unigram count).
NgramCounts ngram_counts(std::string_view prompt);

// Buckets counts by splitmix-finalized FNV-1a into 1 + (h mod (2^k - 1)),
// accumulates collisions, scales the non-bias block to unit L2 norm and
// prepends the bias feature. Scaling all counts by a constant leaves the
// result unchanged.
FeatureVector to_feature_vector(const NgramCounts& counts, uint32_t k);

FeatureVector featurize(std::string_view prompt, uint32_t k);

// One score predictor per herd member over a shared featurizer: prediction
// is <weights_row, features> clamped to [0, 1].
struct RouterModel {
  uint32_t k = kDefaultHashBits;
  std::vector<std::string> model_ids;
  std::vector<double> size_b;                // aligned with model_ids
  std::vector<std::vector<double>> weights;  // rows of length 2^k
};

RouterModel zero_router(uint32_t k, std::vector<std::string> model_ids,
                        std::vector<double> size_b);

std::vector<double> predict(const RouterModel& model, const FeatureVector& features);
std::vector<double> predict(const RouterModel& model, std::string_view prompt);

enum class Optimizer { sgd, adam };

Optimizer optimizer_from_string(const std::string& name);
const char* to_string(Optimizer opt);

struct TrainConfig {
  uint32_t k = kDefaultHashBits;
  size_t epochs = 10;
  size_t batch_size = 16;
  double learning_rate = kDefaultLearningRate;
  Optimizer optimizer = Optimizer::adam;
  uint64_t seed = 42;
  double l2 = 0.0;
  double train_fraction = data::kDefaultTrainFraction;
};

void validate(const TrainConfig& cfg);

// Mean over examples of the per-model mean absolute error. Bounded in [0,1]
// for clamped predictions against scores.
double l1_loss(const std::vector<std::vector<double>>& predictions,
               const std::vector<std::vector<double>>& truths);

// Subgradient of the batch objective's data term, sparse per model as sorted
// (index, value) pairs. Training consumes exactly this routine; the dense
// wrapper below exists for gradient checks.
//
// Conventions: sign subgradient of |.| with 0 at the kink; the clamp passes
// the gradient through on [0, 1] and zeroes it strictly outside.
std::vector<std::vector<std::pair<uint32_t, double>>> batch_data_gradient(
    const RouterModel& model, const std::vector<FeatureVector>& features,
    const std::vector<std::vector<double>>& truths);

// Dense gradient of l1_loss + (l2/2)*||W||^2 per model row.
std::vector<std::vector<double>> l1_loss_gradient(
    const RouterModel& model, const std::vector<FeatureVector>& features,
    const std::vector<std::vector<double>>& truths, double l2 = 0.0);

struct EpochStats {
  size_t epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

struct TrainResult {
  RouterModel model;  // snapshot of the best validation epoch
  std::vector<EpochStats> trace;
  size_t best_epoch = 0;
};

// Mini-batch subgradient descent on the objective above. The corpus is split
// into train/validation by the datasets hash split; the returned model is
// the epoch snapshot with the lowest validation loss. Deterministic given
// cfg.seed. Matrix rows with missing cells are excluded, never imputed.
TrainResult train(const data::Corpus& corpus, const backends::ScoreMatrix& matrix,
                  const TrainConfig& cfg);

// Header JSON line {format, version, k, model_ids, sizes}, then one base-64
// row of little-endian 64-bit floats per model. Round-trips bit-exactly.
void save_router(const RouterModel& model, const std::string& path);
RouterModel load_router(const std::string& path);

void validate_against_herd(const RouterModel& model,
                           const std::vector<backends::ModelDescriptor>& herd);

}  // namespace herd::router
