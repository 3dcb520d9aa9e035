// Acceptance suite: one self-contained check per criterion, one PASS/FAIL
// line each, nonzero exit if anything fails. Needs HERD_BIN pointing at the
// herd binary for the pipeline-level criteria.

#include "herd/metrics.hpp"
#include "herd/reports.hpp"
#include "herd/router.hpp"
#include "herd/scores.hpp"
#include "herd/service.hpp"
#include "herd/triage.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

#include "httplib.h"
#include "json.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <thread>

using namespace herd;

namespace {

// ---------------------------------------------------------------------------
// Harness
// ---------------------------------------------------------------------------

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool condition, const std::string& message) {
  if (!condition) throw CheckFailure(message);
}

struct Runner {
  int failures = 0;

  void criterion(int number, const std::string& name, const std::function<void()>& body) {
    const auto start = std::chrono::steady_clock::now();
    try {
      body();
      const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - start)
                          .count();
      std::printf("[PASS] criterion %d: %s (%lldms)\n", number, name.c_str(),
                  static_cast<long long>(ms));
    } catch (const std::exception& e) {
      ++failures;
      std::printf("[FAIL] criterion %d: %s - %s\n", number, name.c_str(), e.what());
    }
    std::fflush(stdout);
  }
};

std::string herd_bin() {
  const char* bin = std::getenv("HERD_BIN");
  require(bin != nullptr, "HERD_BIN must point at the herd binary");
  return bin;
}

int run_cli(const std::string& args, std::string* output = nullptr) {
  const std::string cmd = herd_bin() + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  require(pipe != nullptr, "popen failed");
  std::string captured;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) captured.append(buf, n);
  const int status = pclose(pipe);
  if (output != nullptr) *output = captured;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::filesystem::path fresh_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  auto dir = std::filesystem::temp_directory_path() /
             ("herd_acceptance_" + tag + "_" + std::to_string(rng()));
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

double mean(const std::vector<double>& v) {
  double total = 0.0;
  for (double x : v) total += x;
  return total / static_cast<double>(v.size());
}

// ---------------------------------------------------------------------------
// Criterion 1: synthetic planted-expertise experiment through the CLI
// ---------------------------------------------------------------------------

void criterion_planted_expertise() {
  const auto start = std::chrono::steady_clock::now();
  const auto dir = fresh_dir("synthetic");
  const std::string corpus_path = (dir / "corpus.jsonl").string();
  const std::string config_path = (dir / "herd.json").string();
  const std::string matrix_path = (dir / "matrix.json").string();
  const std::string router_path = (dir / "router.bin").string();

  testsupport::SyntheticSpec spec;  // 2500 examples, 10 topics, 5 models
  const data::Corpus corpus = testsupport::synthetic_corpus(spec);
  data::save_corpus(corpus, corpus_path);
  service::HerdConfig config;
  config.herd = testsupport::synthetic_herd(spec);
  service::save_config(config, config_path);

  std::string output;
  require(run_cli("score --corpus " + corpus_path + " --config " + config_path +
                      " --output " + matrix_path +
                      " --parallelism 8 --stamp 2026-01-01T00:00:00Z",
                  &output) == 0,
          "cmd_score failed: " + output);
  require(run_cli("train --corpus " + corpus_path + " --matrix " + matrix_path +
                      " --output " + router_path + " --k 16 --epochs 8 --seed 42",
                  &output) == 0,
          "cmd_train failed: " + output);

  const backends::ScoreMatrix matrix = backends::load_matrix(matrix_path);
  const router::RouterModel model = router::load_router(router_path);
  std::map<std::string_view, size_t> row_of;
  for (size_t r = 0; r < matrix.rows(); ++r) row_of[matrix.example_ids[r]] = r;

  const auto [train_split, validation] = data::split_corpus(corpus);
  require(validation.examples.size() > 300, "validation split unexpectedly small");

  std::vector<double> routed, oracle;
  std::vector<double> model_totals(matrix.cols(), 0.0);
  for (const data::Example& ex : validation.examples) {
    const auto& truth = matrix.scores[row_of.at(ex.id)];
    const auto preds = router::predict(model, ex.prompt);
    routed.push_back(truth[triage::route(preds, matrix.size_b, matrix.model_ids, 0.0)]);
    oracle.push_back(
        truth[triage::oracle_select(truth, matrix.size_b, matrix.model_ids)]);
    for (size_t j = 0; j < matrix.cols(); ++j) model_totals[j] += truth[j];
  }
  double best_single = 0.0;
  for (double total : model_totals) {
    best_single = std::max(best_single, total / static_cast<double>(routed.size()));
  }
  const double routed_mean = mean(routed);
  const double oracle_mean = mean(oracle);

  char detail[160];
  std::snprintf(detail, sizeof(detail), "routed %.4f, best single %.4f, oracle %.4f",
                routed_mean, best_single, oracle_mean);
  require(routed_mean >= best_single + 0.05,
          std::string("routed mean must beat the best single model by 0.05: ") + detail);
  require(routed_mean >= 0.9 * oracle_mean,
          std::string("routed mean must reach 90% of oracle: ") + detail);

  const auto elapsed = std::chrono::duration_cast<std::chrono::seconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
  require(elapsed <= 300, "experiment exceeded the 5 minute budget");
  std::printf("       %s\n", detail);
}

// ---------------------------------------------------------------------------
// Criterion 2: oracle equivalence on random matrices
// ---------------------------------------------------------------------------

void criterion_oracle_equivalence() {
  std::mt19937_64 rng(2002);
  std::uniform_int_distribution<size_t> rows_dist(1, 8);
  std::uniform_int_distribution<size_t> cols_dist(1, 5);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  std::uniform_real_distribution<double> size(1.0, 80.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const size_t rows = rows_dist(rng);
    const size_t cols = cols_dist(rng);
    std::vector<std::string> ids;
    std::vector<double> sizes;
    for (size_t c = 0; c < cols; ++c) {
      ids.push_back("m" + std::to_string(c));
      sizes.push_back(size(rng));
    }
    for (size_t r = 0; r < rows; ++r) {
      std::vector<double> row(cols);
      for (double& v : row) v = score(rng);
      if (cols > 1 && trial % 3 == 0) row[1] = row[0];  // planted ties
      const size_t want = testsupport::brute_force_winner(row, sizes, ids);
      require(triage::route(row, sizes, ids, 0.0) == want,
              "route(truth, 0) disagrees with brute force");
      require(triage::oracle_select(row, sizes, ids) == want,
              "oracle_select disagrees with brute force");
    }
  }
}

// ---------------------------------------------------------------------------
// Criterion 3: metric oracle
// ---------------------------------------------------------------------------

void criterion_metric_oracle() {
  require(metrics::token_f1("Paris", "Paris").value() == 1.0, "identical strings must score 1");
  require(std::abs(metrics::token_f1("the cat sat", "cat sat down").value() - 2.0 / 3.0) <=
              1e-4,
          "partial-overlap worked example");
  require(std::abs(metrics::token_f1("A A B", "A B B").value() - 2.0 / 3.0) <= 1e-4,
          "multiset worked example");
  require(metrics::token_f1("", "answer").value() == 0.0, "empty prediction must score 0");

  std::mt19937_64 rng(2003);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto a = testsupport::random_tokens(rng, 12);
    const auto b = testsupport::random_tokens(rng, 12);
    const double expected = testsupport::brute_force_f1(a, b);
    const double got =
        metrics::token_f1(testsupport::join(a), testsupport::join(b)).value();
    require(std::abs(got - expected) <= 1e-12, "token_f1 diverges from brute force");
  }
}

// ---------------------------------------------------------------------------
// Criterion 4: gradient check
// ---------------------------------------------------------------------------

long double objective(const router::RouterModel& model,
                      const std::vector<router::FeatureVector>& features,
                      const std::vector<std::vector<double>>& truths, double l2) {
  long double data = 0.0L;
  for (size_t i = 0; i < features.size(); ++i) {
    const auto preds = router::predict(model, features[i]);
    long double row = 0.0L;
    for (size_t j = 0; j < preds.size(); ++j) {
      row += static_cast<long double>(std::abs(preds[j] - truths[i][j]));
    }
    data += row / static_cast<long double>(preds.size());
  }
  data /= static_cast<long double>(features.size());
  long double reg = 0.0L;
  for (const auto& row : model.weights) {
    for (double w : row) reg += static_cast<long double>(w) * w;
  }
  return data + 0.5L * l2 * reg;
}

void criterion_gradient_check() {
  std::mt19937_64 rng(2004);
  std::uniform_real_distribution<double> small_w(0.0, 0.02);
  std::uniform_real_distribution<double> bias_w(0.2, 0.7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const char* words[] = {"orbit", "lattice", "piano", "quarry", "stone",
                         "meadow", "circuit", "glass", "ember", "harbor"};
  std::uniform_int_distribution<size_t> word(0, 9);
  std::uniform_int_distribution<size_t> len(3, 8);
  const double h = 1e-6;

  int checked = 0;
  int attempts = 0;
  while (checked < 50 && attempts < 1000) {
    ++attempts;
    router::RouterModel model = router::zero_router(8, {"a", "b", "c"}, {7, 13, 70});
    for (auto& row : model.weights) {
      for (auto& w : row) w = small_w(rng);
      row[0] = bias_w(rng);
    }
    std::vector<router::FeatureVector> features;
    for (int i = 0; i < 5; ++i) {
      std::string prompt;
      const size_t count = len(rng);
      for (size_t k = 0; k < count; ++k) {
        if (k) prompt += ' ';
        prompt += words[word(rng)];
      }
      features.push_back(router::featurize(prompt, 8));
    }
    bool usable = true;
    std::vector<std::vector<double>> truths(5, std::vector<double>(3));
    for (size_t i = 0; i < 5 && usable; ++i) {
      const auto raw = router::predict(model, features[i]);
      for (size_t j = 0; j < 3; ++j) {
        if (raw[j] < 0.05 || raw[j] > 0.95) {
          usable = false;  // keep clamp boundaries far away
          break;
        }
        double t = unit(rng);
        int guard = 0;
        while (std::abs(raw[j] - t) < 1e-3 && guard++ < 100) t = unit(rng);
        truths[i][j] = t;
      }
    }
    if (!usable) continue;
    ++checked;
    const double l2 = (checked % 2 == 0) ? 0.01 : 0.0;
    const auto analytic = router::l1_loss_gradient(model, features, truths, l2);
    for (size_t j = 0; j < 3; ++j) {
      for (size_t i = 0; i < model.weights[j].size(); ++i) {
        const double saved = model.weights[j][i];
        model.weights[j][i] = saved + h;
        const long double up = objective(model, features, truths, l2);
        model.weights[j][i] = saved - h;
        const long double down = objective(model, features, truths, l2);
        model.weights[j][i] = saved;
        const double numeric = static_cast<double>((up - down) / (2.0L * h));
        const double got = analytic[j][i];
        if (std::abs(numeric) > 1e-7) {
          require(std::abs(got - numeric) / std::abs(numeric) <= 1e-5,
                  "gradient component off by more than relative 1e-5");
        } else {
          require(std::abs(got - numeric) <= 1e-9, "near-zero gradient component mismatch");
        }
      }
    }
  }
  require(checked == 50, "could not build 50 interior instances");
}

// ---------------------------------------------------------------------------
// Criterion 5: tradeoff monotonicity and crossover
// ---------------------------------------------------------------------------

void criterion_tradeoff() {
  std::mt19937_64 rng(2005);
  std::uniform_int_distribution<size_t> rows_dist(1, 20);
  std::uniform_int_distribution<size_t> cols_dist(1, 6);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  std::uniform_real_distribution<double> size(1.0, 80.0);
  std::uniform_real_distribution<double> step_dist(1e-5, 0.02);

  for (int trial = 0; trial < 1000; ++trial) {
    const size_t rows = rows_dist(rng);
    const size_t cols = cols_dist(rng);
    backends::ScoreMatrix m;
    for (size_t c = 0; c < cols; ++c) {
      m.model_ids.push_back("m" + std::to_string(c));
      m.size_b.push_back(size(rng));
    }
    for (size_t r = 0; r < rows; ++r) {
      m.example_ids.push_back("e" + std::to_string(r));
      std::vector<double> row(cols);
      for (double& v : row) v = score(rng);
      m.scores.push_back(std::move(row));
    }
    std::vector<double> grid = {0.0};
    for (int i = 0; i < 6; ++i) grid.push_back(grid.back() + step_dist(rng));
    const auto points = triage::sweep_tradeoff(m.scores, m, grid);
    for (size_t i = 1; i < points.size(); ++i) {
      require(points[i].effective_size_b <= points[i - 1].effective_size_b + 1e-12,
              "effective size increased along an ascending grid");
    }
  }

  // Closed-form crossover on two-model instances.
  std::uniform_real_distribution<double> hi(0.6, 1.0);
  std::uniform_real_distribution<double> lo(0.1, 0.5);
  for (int trial = 0; trial < 200; ++trial) {
    const double s_big = hi(rng);
    const double s_small = lo(rng);
    const double z_big = 40.0 + size(rng);
    const double z_small = 1.0 + size(rng) / 10.0;
    const double crossover = (s_big - s_small) / (z_big - z_small);

    backends::ScoreMatrix m;
    m.model_ids = {"big", "small"};
    m.size_b = {z_big, z_small};
    for (int r = 0; r < 5; ++r) {
      m.example_ids.push_back("e" + std::to_string(r));
      m.scores.push_back({s_big, s_small});
    }
    const double step = crossover / 10.0;
    std::vector<double> grid;
    for (int i = 0; i <= 25; ++i) grid.push_back(i * step);
    const auto points = triage::sweep_tradeoff(m.scores, m, grid);
    double flip = -1.0;
    for (const auto& p : points) {
      if (p.counts.count("small") && p.counts.at("small") == 5) {
        flip = p.lambda;
        break;
      }
    }
    require(flip >= 0.0, "allocation never flipped to the small model");
    require(std::abs(flip - crossover) <= step + 1e-12,
            "crossover lambda off by more than one grid step");
  }
}

// ---------------------------------------------------------------------------
// Criterion 6: threshold analytics
// ---------------------------------------------------------------------------

void criterion_threshold_analytics() {
  // Hand-worked beat rate.
  const std::vector<double> champion = {1.0, 0.5, 0.0};
  const std::vector<double> herd_scores = {0.9, 0.5, 0.9};
  require(triage::beat_rate(champion, herd_scores) == 1.0 / 3.0,
          "beat rate hand example must be exactly 1/3");
  require(triage::beat_rate(champion, champion) == 0.0, "beat_rate(x,x) must be 0");
  const std::vector<double> ones = {1.0, 1.0};
  const std::vector<double> zeros = {0.0, 0.0};
  require(triage::beat_rate(ones, zeros) == 1.0, "dominance must give 1");

  // Hand-worked deficit coverage: row maxima 0.96, 0.3, 0.99.
  backends::ScoreMatrix m;
  m.model_ids = {"a", "b"};
  m.size_b = {7, 70};
  m.example_ids = {"e0", "e1", "e2"};
  m.scores = {{0.96, 0.5}, {0.3, 0.1}, {0.99, 0.2}};
  const std::vector<double> champ = {0.2, 1.0, 0.5};
  const auto cov = triage::deficit_coverage(champ, m);
  require(cov.wrong_count == 2, "wrong-set must be {0,2}");
  require(cov.herd_coverage.has_value() && *cov.herd_coverage == 1.0,
          "herd coverage must be exactly 1");
  require(cov.per_model_mean[0] == 0.975 && cov.per_model_mean[1] == 0.35,
          "per-model means on the wrong-set");

  const std::vector<double> perfect = {1.0, 1.0, 1.0};
  const auto na = triage::deficit_coverage(perfect, m);
  require(na.wrong_count == 0 && !na.herd_coverage.has_value(),
          "empty wrong-set must report not-applicable, not zero");

  std::mt19937_64 rng(2006);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> x(1 + rng() % 32);
    for (double& v : x) v = u(rng);
    require(triage::beat_rate(x, x) == 0.0, "beat_rate(x,x) must be 0 for random x");
  }
}

// ---------------------------------------------------------------------------
// Criterion 7: determinism of cmd_score and cmd_train
// ---------------------------------------------------------------------------

void criterion_determinism() {
  const auto dir = fresh_dir("determinism");
  const std::string corpus_path = (dir / "corpus.jsonl").string();
  const std::string config_path = (dir / "herd.json").string();

  testsupport::SyntheticSpec spec;
  spec.examples = 400;
  spec.topics = 4;
  spec.models = 2;
  data::save_corpus(testsupport::synthetic_corpus(spec), corpus_path);
  service::HerdConfig config;
  config.herd = testsupport::synthetic_herd(spec);
  service::save_config(config, config_path);

  const std::string seq = (dir / "seq.json").string();
  const std::string par = (dir / "par.json").string();
  std::string output;
  require(run_cli("score --corpus " + corpus_path + " --config " + config_path +
                      " --output " + seq + " --parallelism 1 --stamp 2026-01-01T00:00:00Z",
                  &output) == 0,
          "sequential cmd_score failed: " + output);
  require(run_cli("score --corpus " + corpus_path + " --config " + config_path +
                      " --output " + par + " --parallelism 16 --stamp 2026-01-01T00:00:00Z",
                  &output) == 0,
          "parallel cmd_score failed: " + output);
  require(slurp(seq) == slurp(par), "score matrices differ across parallelism");

  const std::string r1 = (dir / "r1.bin").string();
  const std::string r2 = (dir / "r2.bin").string();
  const std::string flags = " --k 10 --epochs 3 --seed 42";
  require(run_cli("train --corpus " + corpus_path + " --matrix " + seq + " --output " + r1 +
                      flags,
                  &output) == 0,
          "first cmd_train failed: " + output);
  require(run_cli("train --corpus " + corpus_path + " --matrix " + seq + " --output " + r2 +
                      flags,
                  &output) == 0,
          "second cmd_train failed: " + output);
  require(slurp(r1) == slurp(r2), "router files differ across seeded runs");
}

// ---------------------------------------------------------------------------
// Criterion 8: online/offline equivalence
// ---------------------------------------------------------------------------

void criterion_online_offline() {
  testsupport::SyntheticSpec spec;
  spec.examples = 200;
  spec.topics = 4;
  spec.models = 2;
  service::HerdConfig config;
  config.herd = testsupport::synthetic_herd(spec);
  config.listen_port = 0;

  // A router with planted per-topic signal, built in process.
  std::vector<std::string> ids;
  std::vector<double> sizes;
  for (const auto& m : config.herd) {
    ids.push_back(m.model_id);
    sizes.push_back(m.size_b);
  }
  router::RouterModel model = router::zero_router(10, ids, sizes);
  const auto names = testsupport::topic_names(spec.topics);
  for (size_t j = 0; j < ids.size(); ++j) {
    for (size_t t = j * 2; t < j * 2 + 2; ++t) {
      const auto f = router::featurize(testsupport::topic_vocabulary()[t][0], 10);
      model.weights[j][f.indices[1]] = 1.5;
    }
  }

  service::RouteService svc(config, model);
  const int port = svc.start();
  require(port > 0, "service failed to bind");
  httplib::Client client("http://127.0.0.1:" + std::to_string(port));

  auto health = client.Get("/healthz");
  require(health && health->status == 200 && health->body == "ok", "healthz must be 200 ok");

  std::mt19937_64 rng(2008);
  std::uniform_int_distribution<size_t> bank(0, spec.topics - 1);
  std::uniform_int_distribution<size_t> word(0, 7);
  std::uniform_real_distribution<double> lambda_dist(0.0, 0.02);
  for (int i = 0; i < 200; ++i) {
    std::string prompt;
    for (int k = 0; k < 5; ++k) {
      if (k) prompt += ' ';
      prompt += testsupport::topic_vocabulary()[bank(rng)][word(rng)];
    }
    const double lambda = lambda_dist(rng);
    auto res = client.Post("/v1/route",
                           nlohmann::json{{"prompt", prompt}, {"lambda", lambda}}.dump(),
                           "application/json");
    require(res && res->status == 200, "route request failed");
    const auto reply = nlohmann::json::parse(res->body);
    const auto preds = router::predict(model, prompt);
    const size_t offline = triage::route(preds, sizes, ids, lambda);
    require(reply["model_id"] == ids[offline], "online decision diverged from offline route");
  }

  // 100 concurrent requests on top of the 200 sequential ones.
  std::vector<std::thread> workers;
  for (int t = 0; t < 10; ++t) {
    workers.emplace_back([&, t] {
      httplib::Client worker_client("http://127.0.0.1:" + std::to_string(port));
      for (int i = 0; i < 10; ++i) {
        const auto& bank_words = testsupport::topic_vocabulary()[(t + i) % spec.topics];
        worker_client.Post("/v1/route",
                           nlohmann::json{{"prompt", bank_words[i % 8]}}.dump(),
                           "application/json");
      }
    });
  }
  for (auto& w : workers) w.join();

  uint64_t total = 0;
  for (uint64_t c : svc.allocation_counts()) total += c;
  require(total == 300, "allocation counters must sum to 300, got " + std::to_string(total));
  svc.stop();
}

// ---------------------------------------------------------------------------
// Criterion 9: persistence round-trips
// ---------------------------------------------------------------------------

void criterion_round_trips() {
  const auto dir = fresh_dir("roundtrip");
  std::mt19937_64 rng(2009);

  // Corpus: field-for-field identity.
  testsupport::SyntheticSpec spec;
  spec.examples = 120;
  spec.topics = 4;
  spec.models = 2;
  data::Corpus corpus = testsupport::synthetic_corpus(spec);
  corpus.examples[0].prompt += "\nline two \"quoted\" café";
  const std::string corpus_path = (dir / "c.jsonl").string();
  data::save_corpus(corpus, corpus_path);
  require(data::load_corpus(corpus_path).examples == corpus.examples,
          "corpus did not round-trip field-for-field");

  // Matrix: field-for-field identity.
  backends::ScoreMatrix m;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  m.model_ids = {"a", "b", "c"};
  m.size_b = {7.0, 13.5, 70.25};
  for (int r = 0; r < 50; ++r) {
    m.example_ids.push_back("e" + std::to_string(r));
    m.scores.push_back({u(rng), u(rng), u(rng)});
  }
  m.provenance["a"] = backends::Provenance{"stub", "2026-01-01T00:00:00Z", {}};
  const std::string matrix_path = (dir / "m.json").string();
  backends::save_matrix(m, matrix_path);
  const backends::ScoreMatrix loaded = backends::load_matrix(matrix_path);
  require(loaded.example_ids == m.example_ids && loaded.model_ids == m.model_ids &&
              loaded.size_b == m.size_b && loaded.scores == m.scores,
          "matrix did not round-trip field-for-field");

  // Router: bitwise-identical predictions on 100 random prompts.
  router::RouterModel model = router::zero_router(9, {"a", "b"}, {7, 70});
  std::uniform_real_distribution<double> w(-2.0, 2.0);
  for (auto& row : model.weights) {
    for (auto& x : row) x = w(rng);
  }
  const std::string router_path = (dir / "r.bin").string();
  router::save_router(model, router_path);
  const router::RouterModel reloaded = router::load_router(router_path);
  require(reloaded.weights == model.weights, "router weights did not round-trip bitwise");
  const char* words[] = {"orbit", "piano", "quarry", "meadow", "ember"};
  std::uniform_int_distribution<size_t> word(0, 4);
  for (int i = 0; i < 100; ++i) {
    std::string prompt;
    for (int k = 0; k < 4; ++k) {
      if (k) prompt += ' ';
      prompt += words[word(rng)];
    }
    require(router::predict(model, prompt) == router::predict(reloaded, prompt),
            "reloaded router predictions differ");
  }
}

}  // namespace

int main() {
  Runner runner;
  runner.criterion(1, "synthetic planted-expertise routing beats the best single model",
                   criterion_planted_expertise);
  runner.criterion(2, "route(truth, lambda=0) equals oracle_select on random matrices",
                   criterion_oracle_equivalence);
  runner.criterion(3, "token_f1 matches the brute-force multiset oracle",
                   criterion_metric_oracle);
  runner.criterion(4, "analytic training gradient matches central finite differences",
                   criterion_gradient_check);
  runner.criterion(5, "tradeoff sweep is monotone and hits the closed-form crossover",
                   criterion_tradeoff);
  runner.criterion(6, "beat rate and deficit coverage reproduce hand-computed values",
                   criterion_threshold_analytics);
  runner.criterion(7, "cmd_score and cmd_train are deterministic", criterion_determinism);
  runner.criterion(8, "online routing matches offline decisions under load",
                   criterion_online_offline);
  runner.criterion(9, "corpus, matrix and router files survive round-trips",
                   criterion_round_trips);

  if (runner.failures > 0) {
    std::printf("%d criterion(s) failed\n", runner.failures);
    return 1;
  }
  std::printf("all 9 criteria passed\n");
  return 0;
}
