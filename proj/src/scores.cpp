#include "herd/scores.hpp"

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <ctime>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace herd::backends {

using json = nlohmann::json;

namespace {

json opts_to_json(const metrics::NormalizationOptions& o) {
  return json{{"lowercase", o.lowercase},
              {"strip_punctuation", o.strip_punctuation},
              {"collapse_whitespace", o.collapse_whitespace}};
}

metrics::NormalizationOptions opts_from_json(const json& j) {
  metrics::NormalizationOptions o;
  o.lowercase = j.value("lowercase", true);
  o.strip_punctuation = j.value("strip_punctuation", true);
  o.collapse_whitespace = j.value("collapse_whitespace", true);
  return o;
}

}  // namespace

bool ScoreMatrix::complete() const {
  for (const auto& row : scores) {
    for (double v : row) {
      if (std::isnan(v)) return false;
    }
  }
  return true;
}

ScoreMatrix ScoreMatrix::without_incomplete_rows() const {
  ScoreMatrix out;
  out.model_ids = model_ids;
  out.size_b = size_b;
  out.provenance = provenance;
  for (size_t r = 0; r < rows(); ++r) {
    bool ok = true;
    for (double v : scores[r]) {
      if (std::isnan(v)) {
        ok = false;
        break;
      }
    }
    if (ok) {
      out.example_ids.push_back(example_ids[r]);
      out.scores.push_back(scores[r]);
    }
  }
  return out;
}

std::vector<double> ScoreMatrix::model_means() const {
  std::vector<double> sums(cols(), 0.0);
  size_t counted = 0;
  for (size_t r = 0; r < rows(); ++r) {
    bool ok = true;
    for (double v : scores[r]) {
      if (std::isnan(v)) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    ++counted;
    for (size_t c = 0; c < cols(); ++c) sums[c] += scores[r][c];
  }
  for (double& s : sums) {
    s = counted == 0 ? std::nan("") : s / static_cast<double>(counted);
  }
  return sums;
}

void validate(const ScoreMatrix& matrix) {
  if (matrix.model_ids.empty()) throw std::invalid_argument("herd must be non-empty");
  if (matrix.size_b.size() != matrix.model_ids.size()) {
    throw std::invalid_argument("size_b and model_ids lengths differ");
  }
  std::set<std::string_view> ids;
  for (const auto& id : matrix.model_ids) {
    if (id.empty() || !ids.insert(id).second) {
      throw std::invalid_argument("duplicate or empty model_id in matrix");
    }
  }
  for (double s : matrix.size_b) {
    if (!(s > 0.0)) throw std::invalid_argument("size_b must be > 0");
  }
  ids.clear();
  for (const auto& id : matrix.example_ids) {
    if (id.empty() || !ids.insert(id).second) {
      throw std::invalid_argument("duplicate or empty example_id in matrix");
    }
  }
  if (matrix.scores.size() != matrix.rows()) {
    throw std::invalid_argument("score grid row count does not match example_ids");
  }
  for (const auto& row : matrix.scores) {
    if (row.size() != matrix.cols()) {
      throw std::invalid_argument("score grid column count does not match model_ids");
    }
    for (double v : row) {
      if (std::isnan(v)) continue;  // missing cell (skip mode)
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("score out of range [0,1]: " + std::to_string(v));
      }
    }
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

struct CellResult {
  bool done = false;
  bool failed = false;
  bool resumed = false;
  std::string completion;
  std::string error;
};

using ResumeKey = std::pair<std::string, std::string>;  // (example_id, model_id)

std::map<ResumeKey, std::string> load_journal(const std::string& path) {
  std::map<ResumeKey, std::string> out;
  std::ifstream in(path, std::ios::binary);
  if (!in) return out;
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(std::move(line));
  }
  for (size_t i = 0; i < lines.size(); ++i) {
    json doc = json::parse(lines[i], nullptr, false);
    if (doc.is_discarded()) {
      // A torn final line from an interrupted run is expected; anything
      // else is corruption.
      if (i + 1 == lines.size()) break;
      throw std::runtime_error(path + ": corrupt journal line " + std::to_string(i + 1));
    }
    if (!doc.contains("example_id") || !doc.contains("model_id") ||
        !doc.contains("completion")) {
      throw std::runtime_error(path + ": journal line " + std::to_string(i + 1) +
                               " missing fields");
    }
    out[{doc["example_id"].get<std::string>(), doc["model_id"].get<std::string>()}] =
        doc["completion"].get<std::string>();
  }
  return out;
}

}  // namespace

ScoreMatrix collect_scores(const data::Corpus& corpus,
                           const std::vector<ModelDescriptor>& herd,
                           const CollectOptions& opts, CompleteFn complete_fn) {
  if (corpus.examples.empty()) throw std::invalid_argument("corpus must be non-empty");
  validate_herd(herd);
  if (opts.parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");
  if (!complete_fn) {
    complete_fn = [&opts](const ModelDescriptor& m, const std::string& prompt) {
      return complete(m, prompt, opts.completion);
    };
  }

  std::map<ResumeKey, std::string> journal;
  if (opts.resume && !opts.progress_path.empty()) {
    journal = load_journal(opts.progress_path);
  }
  std::ofstream log;
  if (!opts.progress_path.empty()) {
    log.open(opts.progress_path, std::ios::binary | (opts.resume ? std::ios::app : std::ios::trunc));
    if (!log) throw std::runtime_error("cannot write completion log: " + opts.progress_path);
  }

  const std::string stamp = opts.timestamp.empty() ? utc_timestamp() : opts.timestamp;
  const size_t n = corpus.examples.size();

  ScoreMatrix matrix;
  matrix.scores.assign(n, std::vector<double>(herd.size(), std::nan("")));
  for (const data::Example& ex : corpus.examples) matrix.example_ids.push_back(ex.id);
  for (const ModelDescriptor& m : herd) {
    matrix.model_ids.push_back(m.model_id);
    matrix.size_b.push_back(m.size_b);
    matrix.provenance[m.model_id] =
        Provenance{to_string(m.kind), stamp, opts.metrics.defaults};
  }

  for (size_t col = 0; col < herd.size(); ++col) {
    const ModelDescriptor& model = herd[col];
    std::vector<CellResult> cells(n);
    for (size_t i = 0; i < n; ++i) {
      auto it = journal.find({corpus.examples[i].id, model.model_id});
      if (it != journal.end()) {
        cells[i].done = true;
        cells[i].resumed = true;
        cells[i].completion = it->second;
      }
    }

    std::mutex mu;
    std::condition_variable cv;
    std::atomic<size_t> next{0};
    std::atomic<bool> stop{false};

    const auto worker = [&] {
      while (!stop.load(std::memory_order_relaxed)) {
        const size_t i = next.fetch_add(1);
        if (i >= n) return;
        if (cells[i].resumed) continue;
        CellResult r;
        r.done = true;
        try {
          r.completion = complete_fn(model, corpus.examples[i].prompt);
        } catch (const std::exception& e) {
          r.failed = true;
          r.error = e.what();
        } catch (...) {
          r.failed = true;
          r.error = "unknown backend failure";
        }
        {
          std::lock_guard<std::mutex> lk(mu);
          cells[i] = std::move(r);
        }
        cv.notify_all();
      }
    };

    const size_t pool = std::min<size_t>(static_cast<size_t>(opts.parallelism), n);
    std::vector<std::thread> threads;
    threads.reserve(pool);
    for (size_t t = 0; t < pool; ++t) threads.emplace_back(worker);

    // Single writer: consume completed cells in corpus order so the journal
    // is append-ordered and deterministic.
    std::string abort_error;
    for (size_t i = 0; i < n && abort_error.empty(); ++i) {
      CellResult r;
      {
        std::unique_lock<std::mutex> lk(mu);
        cv.wait(lk, [&] { return cells[i].done; });
        r = cells[i];
      }
      if (r.failed) {
        if (opts.strict) {
          abort_error = r.error;
          break;
        }
        continue;  // cell stays NaN
      }
      const data::Example& ex = corpus.examples[i];
      const double score =
          metrics::token_f1(r.completion, ex.reference,
                            opts.metrics.for_dataset(ex.dataset))
              .value();
      matrix.scores[i][col] = score;
      if (log.is_open() && !r.resumed) {
        json line{{"example_id", ex.id},
                  {"model_id", model.model_id},
                  {"completion", r.completion},
                  {"score", score}};
        log << line.dump() << '\n';
        log.flush();
      }
    }

    stop.store(true);
    for (std::thread& t : threads) t.join();
    if (!abort_error.empty()) throw BackendError(model.model_id, abort_error);
  }

  validate(matrix);
  return matrix;
}

void save_matrix(const ScoreMatrix& matrix, const std::string& path) {
  validate(matrix);
  json prov = json::object();
  for (const auto& [model_id, p] : matrix.provenance) {
    prov[model_id] = json{{"kind", p.kind},
                          {"timestamp", p.timestamp},
                          {"metrics", opts_to_json(p.metric_opts)}};
  }
  json doc{{"format", "herd-scores"}, {"version", 1},
           {"example_ids", matrix.example_ids},
           {"model_ids", matrix.model_ids},
           {"size_b", matrix.size_b},
           {"scores", matrix.scores},
           {"provenance", prov}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write matrix file: " + path);
  out << doc.dump() << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

ScoreMatrix load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open matrix file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  if (doc.value("format", "") != "herd-scores" || doc.value("version", 0) != 1) {
    throw std::runtime_error(path + ": not a herd-scores v1 file");
  }
  ScoreMatrix matrix;
  try {
    matrix.example_ids = doc.at("example_ids").get<std::vector<std::string>>();
    matrix.model_ids = doc.at("model_ids").get<std::vector<std::string>>();
    matrix.size_b = doc.at("size_b").get<std::vector<double>>();
    const json& grid = doc.at("scores");
    for (const json& row : grid) {
      std::vector<double> out_row;
      out_row.reserve(row.size());
      for (const json& cell : row) {
        if (cell.is_null()) {
          out_row.push_back(std::nan(""));
        } else if (cell.is_number()) {
          out_row.push_back(cell.get<double>());
        } else {
          throw std::runtime_error("score cells must be numbers or null");
        }
      }
      matrix.scores.push_back(std::move(out_row));
    }
    if (doc.contains("provenance")) {
      for (const auto& [model_id, p] : doc.at("provenance").items()) {
        Provenance prov;
        prov.kind = p.value("kind", "");
        prov.timestamp = p.value("timestamp", "");
        if (p.contains("metrics")) prov.metric_opts = opts_from_json(p["metrics"]);
        matrix.provenance[model_id] = prov;
      }
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  try {
    validate(matrix);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return matrix;
}

}  // namespace herd::backends
