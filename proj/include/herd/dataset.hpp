#pragma once

#include "json.hpp"

#include <string>
#include <utility>
#include <vector>

namespace herd::data {

using json = nlohmann::json;

enum class Split { train, validation, test };

const char* to_string(Split s);

struct Example {
  std::string id;
  std::string dataset;
  std::string topic;
  std::string prompt;
  std::string reference;

  bool operator==(const Example&) const = default;
};

struct Corpus {
  std::vector<Example> examples;
  Split split = Split::test;
};

struct SkipReport {
  std::string record_id;
  std::string reason;
};

// Adapter output: canonical examples plus per-record skip reports. In strict
// mode (the default) a malformed record aborts the whole adaptation instead
// of being reported, so silent data loss cannot skew score matrices.
struct AdaptResult {
  std::vector<Example> examples;
  std::vector<SkipReport> skipped;
};

inline constexpr int kCorpusFormatVersion = 1;

// Raw benchmark records: a JSON array document or one JSON object per line.
std::vector<json> parse_records(const std::string& text);
std::vector<json> load_records(const std::string& path);

AdaptResult adapt_mmlu(const std::vector<json>& records, bool strict = true);
AdaptResult adapt_truthfulqa(const std::vector<json>& records, bool strict = true);
AdaptResult adapt_gsm8k(const std::vector<json>& records, bool strict = true);
AdaptResult adapt_lambada(const std::vector<json>& records, bool strict = true);
AdaptResult adapt_passthrough(const std::vector<json>& records,
                              const std::string& dataset_tag, bool strict = true);

// Dispatch by dataset tag: mmlu, truthfulqa, gsm8k, lambada, dolly, sciq,
// or "passthrough" for generic prompt/reference records. Unknown tag throws.
AdaptResult adapt(const std::string& dataset_tag, const std::vector<json>& records,
                  bool strict = true);

bool known_dataset(const std::string& dataset_tag);

// Uniqueness of ids, non-empty ids and prompts.
void validate(const Corpus& corpus);

void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);

// Mirrors a 12000-train / 3001-validation style split.
inline constexpr double kDefaultTrainFraction = 0.8;

// Deterministic split by stable hash of example id: independent of corpus
// order and of how many times it is applied.
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus,
                                       double train_fraction = kDefaultTrainFraction);

}  // namespace herd::data
