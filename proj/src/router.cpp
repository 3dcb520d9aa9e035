#include "herd/router.hpp"

#include "herd/hashing.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace herd::router {

using json = nlohmann::json;

namespace {

void check_k(uint32_t k) {
  if (k < kMinHashBits || k > kMaxHashBits) {
    throw std::invalid_argument("hashing width exponent must be in [8,26], got " +
                                std::to_string(k));
  }
}

double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

// ---------------------------------------------------------------------------
// base64 (standard alphabet, padded)
// ---------------------------------------------------------------------------

constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string b64_encode(const std::vector<unsigned char>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  size_t i = 0;
  while (i + 3 <= bytes.size()) {
    const uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out.push_back(kB64Alphabet[(v >> 6) & 63]);
    out.push_back(kB64Alphabet[v & 63]);
    i += 3;
  }
  const size_t rest = bytes.size() - i;
  if (rest == 1) {
    const uint32_t v = bytes[i] << 16;
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out += "==";
  } else if (rest == 2) {
    const uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out.push_back(kB64Alphabet[(v >> 6) & 63]);
    out += "=";
  }
  return out;
}

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

std::vector<unsigned char> b64_decode(std::string_view text) {
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  uint32_t acc = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=') break;
    const int v = b64_value(c);
    if (v < 0) throw std::runtime_error("invalid base64 character");
    acc = (acc << 6) | static_cast<uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<unsigned char>((acc >> bits) & 0xFF));
    }
  }
  return out;
}

std::vector<unsigned char> row_to_bytes(const std::vector<double>& row) {
  std::vector<unsigned char> bytes;
  bytes.reserve(row.size() * 8);
  for (double d : row) {
    const uint64_t u = std::bit_cast<uint64_t>(d);
    for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<unsigned char>(u >> (8 * b)));
  }
  return bytes;
}

std::vector<double> bytes_to_row(const std::vector<unsigned char>& bytes) {
  std::vector<double> row(bytes.size() / 8);
  for (size_t i = 0; i < row.size(); ++i) {
    uint64_t u = 0;
    for (int b = 7; b >= 0; --b) u = (u << 8) | bytes[i * 8 + static_cast<size_t>(b)];
    row[i] = std::bit_cast<double>(u);
  }
  return row;
}

}  // namespace

// ---------------------------------------------------------------------------
// Featurization
// ---------------------------------------------------------------------------

NgramCounts ngram_counts(std::string_view prompt) {
  std::string lowered(prompt);
  for (char& c : lowered) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  std::vector<std::string> tokens;
  std::istringstream iss(lowered);
  std::string tok;
  while (iss >> tok) tokens.push_back(std::move(tok));

  NgramCounts counts;
  for (const std::string& t : tokens) counts[t] += 1.0;
  for (size_t i = 0; i + 1 < tokens.size(); ++i) {
    if (tokens[i] == tokens[i + 1]) continue;
    counts[tokens[i] + " " + tokens[i + 1]] += 1.0;
  }
  return counts;
}

FeatureVector to_feature_vector(const NgramCounts& counts, uint32_t k) {
  check_k(k);
  const uint64_t buckets = (uint64_t{1} << k) - 1;  // bucket 0 is the bias
  std::map<uint32_t, double> accumulated;
  for (const auto& [ngram, count] : counts) {
    const uint32_t index =
        1 + static_cast<uint32_t>(hashing::mix(hashing::fnv1a(ngram)) % buckets);
    accumulated[index] += count;
  }
  double norm_sq = 0.0;
  for (const auto& [index, value] : accumulated) norm_sq += value * value;
  const double norm = std::sqrt(norm_sq);

  FeatureVector out;
  out.k = k;
  out.indices.reserve(accumulated.size() + 1);
  out.values.reserve(accumulated.size() + 1);
  out.indices.push_back(0);
  out.values.push_back(1.0);
  for (const auto& [index, value] : accumulated) {
    out.indices.push_back(index);
    out.values.push_back(value / norm);
  }
  return out;
}

FeatureVector featurize(std::string_view prompt, uint32_t k) {
  return to_feature_vector(ngram_counts(prompt), k);
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

RouterModel zero_router(uint32_t k, std::vector<std::string> model_ids,
                        std::vector<double> size_b) {
  check_k(k);
  if (model_ids.empty()) throw std::invalid_argument("router needs at least one model");
  if (model_ids.size() != size_b.size()) {
    throw std::invalid_argument("model_ids and size_b lengths differ");
  }
  RouterModel model;
  model.k = k;
  model.model_ids = std::move(model_ids);
  model.size_b = std::move(size_b);
  model.weights.assign(model.model_ids.size(),
                       std::vector<double>(size_t{1} << k, 0.0));
  return model;
}

namespace {

double dot(const std::vector<double>& weights, const FeatureVector& f) {
  double acc = 0.0;
  for (size_t i = 0; i < f.indices.size(); ++i) acc += weights[f.indices[i]] * f.values[i];
  return acc;
}

}  // namespace

std::vector<double> predict(const RouterModel& model, const FeatureVector& features) {
  if (features.k != model.k) {
    throw std::invalid_argument("feature vector k does not match router k");
  }
  std::vector<double> out(model.weights.size());
  for (size_t j = 0; j < model.weights.size(); ++j) {
    out[j] = clamp01(dot(model.weights[j], features));
  }
  return out;
}

std::vector<double> predict(const RouterModel& model, std::string_view prompt) {
  return predict(model, featurize(prompt, model.k));
}

// ---------------------------------------------------------------------------
// Loss and gradient
// ---------------------------------------------------------------------------

Optimizer optimizer_from_string(const std::string& name) {
  if (name == "sgd") return Optimizer::sgd;
  if (name == "adam") return Optimizer::adam;
  throw std::invalid_argument("unknown optimizer: " + name);
}

const char* to_string(Optimizer opt) {
  return opt == Optimizer::sgd ? "sgd" : "adam";
}

void validate(const TrainConfig& cfg) {
  check_k(cfg.k);
  if (cfg.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw std::invalid_argument("learning_rate must be positive");
  }
  if (!(cfg.l2 >= 0.0) || !std::isfinite(cfg.l2)) {
    throw std::invalid_argument("l2 must be >= 0");
  }
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
    throw std::invalid_argument("train_fraction must be in (0,1)");
  }
}

double l1_loss(const std::vector<std::vector<double>>& predictions,
               const std::vector<std::vector<double>>& truths) {
  if (predictions.empty() || predictions.size() != truths.size()) {
    throw std::invalid_argument("prediction/truth example counts differ or are empty");
  }
  double total = 0.0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i].size() != truths[i].size() || predictions[i].empty()) {
      throw std::invalid_argument("prediction/truth model counts differ or are empty");
    }
    double row = 0.0;
    for (size_t j = 0; j < predictions[i].size(); ++j) {
      row += std::abs(predictions[i][j] - truths[i][j]);
    }
    total += row / static_cast<double>(predictions[i].size());
  }
  return total / static_cast<double>(predictions.size());
}

std::vector<std::vector<std::pair<uint32_t, double>>> batch_data_gradient(
    const RouterModel& model, const std::vector<FeatureVector>& features,
    const std::vector<std::vector<double>>& truths) {
  if (features.empty() || features.size() != truths.size()) {
    throw std::invalid_argument("feature/truth example counts differ or are empty");
  }
  const size_t n_models = model.weights.size();
  const double scale =
      1.0 / (static_cast<double>(features.size()) * static_cast<double>(n_models));

  std::vector<std::vector<std::pair<uint32_t, double>>> grads(n_models);
  for (size_t j = 0; j < n_models; ++j) {
    std::vector<std::pair<uint32_t, double>>& g = grads[j];
    for (size_t i = 0; i < features.size(); ++i) {
      if (truths[i].size() != n_models) {
        throw std::invalid_argument("truth row width does not match model count");
      }
      const double raw = dot(model.weights[j], features[i]);
      if (raw < 0.0 || raw > 1.0) continue;  // clamp blocks the gradient
      const double err = raw - truths[i][j];
      if (err == 0.0) continue;  // subgradient 0 at the kink
      const double s = (err > 0.0 ? 1.0 : -1.0) * scale;
      for (size_t f = 0; f < features[i].indices.size(); ++f) {
        g.emplace_back(features[i].indices[f], s * features[i].values[f]);
      }
    }
    std::sort(g.begin(), g.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    // Merge duplicate indices in place.
    size_t w = 0;
    for (size_t r = 0; r < g.size(); ++r) {
      if (w > 0 && g[w - 1].first == g[r].first) {
        g[w - 1].second += g[r].second;
      } else {
        g[w++] = g[r];
      }
    }
    g.resize(w);
  }
  return grads;
}

std::vector<std::vector<double>> l1_loss_gradient(
    const RouterModel& model, const std::vector<FeatureVector>& features,
    const std::vector<std::vector<double>>& truths, double l2) {
  const auto sparse = batch_data_gradient(model, features, truths);
  std::vector<std::vector<double>> dense(model.weights.size(),
                                         std::vector<double>(size_t{1} << model.k, 0.0));
  for (size_t j = 0; j < sparse.size(); ++j) {
    for (const auto& [index, value] : sparse[j]) dense[j][index] = value;
    if (l2 != 0.0) {
      for (size_t i = 0; i < dense[j].size(); ++i) dense[j][i] += l2 * model.weights[j][i];
    }
  }
  return dense;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

struct AdamState {
  std::vector<std::vector<double>> m, v;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double beta1_t = 1.0, beta2_t = 1.0;
};

void adam_step(RouterModel& model, AdamState& state,
               const std::vector<std::vector<std::pair<uint32_t, double>>>& grads,
               double lr, double l2) {
  state.beta1_t *= state.beta1;
  state.beta2_t *= state.beta2;
  const double m_corr = 1.0 / (1.0 - state.beta1_t);
  const double v_corr = 1.0 / (1.0 - state.beta2_t);
  for (size_t j = 0; j < model.weights.size(); ++j) {
    std::vector<double>& w = model.weights[j];
    std::vector<double>& m = state.m[j];
    std::vector<double>& v = state.v[j];
    const auto& sparse = grads[j];
    size_t s = 0;
    for (size_t i = 0; i < w.size(); ++i) {
      double g = 0.0;
      if (s < sparse.size() && sparse[s].first == i) g = sparse[s++].second;
      if (l2 != 0.0) g += l2 * w[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double mhat = m[i] * m_corr;
      const double vhat = v[i] * v_corr;
      w[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

void sgd_step(RouterModel& model,
              const std::vector<std::vector<std::pair<uint32_t, double>>>& grads,
              double lr, double l2) {
  for (size_t j = 0; j < model.weights.size(); ++j) {
    std::vector<double>& w = model.weights[j];
    if (l2 != 0.0) {
      const double decay = 1.0 - lr * l2;
      for (double& wi : w) wi *= decay;
    }
    for (const auto& [index, value] : grads[j]) w[index] -= lr * value;
  }
}

double dataset_loss(const RouterModel& model, const std::vector<FeatureVector>& features,
                    const std::vector<std::vector<double>>& truths) {
  std::vector<std::vector<double>> preds;
  preds.reserve(features.size());
  for (const FeatureVector& f : features) preds.push_back(predict(model, f));
  return l1_loss(preds, truths);
}

}  // namespace

TrainResult train(const data::Corpus& corpus, const backends::ScoreMatrix& matrix,
                  const TrainConfig& cfg) {
  validate(cfg);
  backends::validate(matrix);

  std::map<std::string_view, size_t> row_of;
  for (size_t r = 0; r < matrix.rows(); ++r) row_of[matrix.example_ids[r]] = r;

  const auto [train_split, val_split] = data::split_corpus(corpus, cfg.train_fraction);

  // Featurize and pair with truth rows; rows with missing cells are dropped.
  const auto prepare = [&](const data::Corpus& part, std::vector<FeatureVector>& features,
                           std::vector<std::vector<double>>& truths) {
    for (const data::Example& ex : part.examples) {
      auto it = row_of.find(ex.id);
      if (it == row_of.end()) {
        throw std::invalid_argument("example " + ex.id + " missing from score matrix");
      }
      const std::vector<double>& row = matrix.scores[it->second];
      if (std::any_of(row.begin(), row.end(), [](double v) { return std::isnan(v); })) {
        continue;
      }
      features.push_back(featurize(ex.prompt, cfg.k));
      truths.push_back(row);
    }
  };
  std::vector<FeatureVector> train_features, val_features;
  std::vector<std::vector<double>> train_truths, val_truths;
  prepare(train_split, train_features, train_truths);
  prepare(val_split, val_features, val_truths);
  if (train_features.empty()) throw std::invalid_argument("train split is empty");
  if (val_features.empty()) throw std::invalid_argument("validation split is empty");

  RouterModel model = zero_router(cfg.k, matrix.model_ids, matrix.size_b);
  AdamState adam;
  if (cfg.optimizer == Optimizer::adam) {
    adam.m.assign(model.weights.size(), std::vector<double>(size_t{1} << cfg.k, 0.0));
    adam.v.assign(model.weights.size(), std::vector<double>(size_t{1} << cfg.k, 0.0));
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<size_t> order(train_features.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();

  for (size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<FeatureVector> batch_features;
      std::vector<std::vector<double>> batch_truths;
      batch_features.reserve(end - start);
      batch_truths.reserve(end - start);
      for (size_t i = start; i < end; ++i) {
        batch_features.push_back(train_features[order[i]]);
        batch_truths.push_back(train_truths[order[i]]);
      }
      const auto grads = batch_data_gradient(model, batch_features, batch_truths);
      if (cfg.optimizer == Optimizer::adam) {
        adam_step(model, adam, grads, cfg.learning_rate, cfg.l2);
      } else {
        sgd_step(model, grads, cfg.learning_rate, cfg.l2);
      }
    }

    const double train_loss = dataset_loss(model, train_features, train_truths);
    const double val_loss = dataset_loss(model, val_features, val_truths);
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
      throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) +
                               "; lower the learning rate");
    }
    result.trace.push_back(EpochStats{epoch, train_loss, val_loss});
    if (val_loss < best_val) {
      best_val = val_loss;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

void save_router(const RouterModel& model, const std::string& path) {
  check_k(model.k);
  if (model.model_ids.empty() || model.model_ids.size() != model.weights.size() ||
      model.model_ids.size() != model.size_b.size()) {
    throw std::invalid_argument("router model is inconsistent");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write router file: " + path);
  json header{{"format", "herd-router"},
              {"version", 1},
              {"k", model.k},
              {"model_ids", model.model_ids},
              {"sizes", model.size_b}};
  out << header.dump() << '\n';
  const size_t row_len = size_t{1} << model.k;
  for (const auto& row : model.weights) {
    if (row.size() != row_len) throw std::invalid_argument("weight row length != 2^k");
    out << b64_encode(row_to_bytes(row)) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

RouterModel load_router(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open router file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty router file");
  json header = json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("format", "") != "herd-router" ||
      header.value("version", 0) != 1) {
    throw std::runtime_error(path + ": not a herd-router v1 file");
  }
  RouterModel model;
  try {
    model.k = header.at("k").get<uint32_t>();
    model.model_ids = header.at("model_ids").get<std::vector<std::string>>();
    model.size_b = header.at("sizes").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  check_k(model.k);
  if (model.model_ids.empty() || model.model_ids.size() != model.size_b.size()) {
    throw std::runtime_error(path + ": inconsistent router header");
  }
  const size_t row_len = size_t{1} << model.k;
  for (size_t j = 0; j < model.model_ids.size(); ++j) {
    if (!std::getline(in, line)) {
      throw std::runtime_error(path + ": truncated router file (expected " +
                               std::to_string(model.model_ids.size()) + " weight rows)");
    }
    std::vector<double> row;
    try {
      row = bytes_to_row(b64_decode(line));
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(path + ": row " + std::to_string(j + 1) + ": " + e.what());
    }
    if (row.size() != row_len) {
      throw std::runtime_error(path + ": row " + std::to_string(j + 1) +
                               " has wrong length");
    }
    model.weights.push_back(std::move(row));
  }
  while (std::getline(in, line)) {
    if (!line.empty()) throw std::runtime_error(path + ": trailing data after weight rows");
  }
  return model;
}

void validate_against_herd(const RouterModel& model,
                           const std::vector<backends::ModelDescriptor>& herd) {
  if (model.model_ids.size() != herd.size()) {
    throw std::invalid_argument(
        "router trained for " + std::to_string(model.model_ids.size()) +
        " models but herd config lists " + std::to_string(herd.size()));
  }
  for (size_t i = 0; i < herd.size(); ++i) {
    if (model.model_ids[i] != herd[i].model_id) {
      throw std::invalid_argument("router/herd roster mismatch at position " +
                                  std::to_string(i) + ": " + model.model_ids[i] +
                                  " vs " + herd[i].model_id);
    }
  }
}

}  // namespace herd::router
