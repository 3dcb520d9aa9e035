#include "herd/dataset.hpp"

#include "herd/hashing.hpp"
#include "herd/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace herd::data {

namespace {

// Prompt templates are versioned constants: editing any of them changes the
// canonical corpus content and must bump kCorpusFormatVersion.
constexpr const char* kMmluInstruction =
    "Answer with the full text of the correct choice.";
constexpr const char* kTruthfulqaInstruction =
    "Is this answer truthful? Respond with 'True' or 'False'.";
constexpr const char* kGsm8kInstruction =
    "Respond with only the final answer, without any reasoning steps.";
constexpr const char* kLambadaInstruction =
    "Complete the passage with its missing final word:";

constexpr const char* kGsm8kMarker = "####";

std::string record_label(const std::string& tag, size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s-%06zu", tag.c_str(), index);
  return buf;
}

[[noreturn]] void record_error(const std::string& record_id, const std::string& reason) {
  throw std::invalid_argument("record " + record_id + ": " + reason);
}

// Returns false after reporting (or throws in strict mode).
bool report_or_throw(AdaptResult& out, bool strict, const std::string& record_id,
                     const std::string& reason) {
  if (strict) record_error(record_id, reason);
  out.skipped.push_back({record_id, reason});
  return false;
}

const json* find_key(const json& rec, const char* key) {
  if (!rec.is_object()) return nullptr;
  auto it = rec.find(key);
  if (it == rec.end()) return nullptr;
  return &*it;
}

bool get_string(const json& rec, const char* key, std::string& out) {
  const json* v = find_key(rec, key);
  if (v == nullptr || !v->is_string()) return false;
  out = v->get<std::string>();
  return true;
}

std::string rtrim_ws(std::string_view s) {
  size_t end = s.size();
  while (end > 0 && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return std::string(s.substr(0, end));
}

std::string trim_ws(std::string_view s) {
  size_t begin = 0;
  while (begin < s.size() && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  return rtrim_ws(s.substr(begin));
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream iss{std::string(s)};
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

}  // namespace

const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "test";
}

std::vector<json> parse_records(const std::string& text) {
  size_t start = 0;
  while (start < text.size() && std::isspace(static_cast<unsigned char>(text[start]))) ++start;
  std::vector<json> records;
  if (start < text.size() && text[start] == '[') {
    json doc = json::parse(text);
    for (auto& item : doc) records.push_back(std::move(item));
    return records;
  }
  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim_ws(line).empty()) continue;
    try {
      records.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw std::runtime_error("input line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return records;
}

std::vector<json> load_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open input file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_records(buf.str());
}

AdaptResult adapt_mmlu(const std::vector<json>& records, bool strict) {
  AdaptResult out;
  for (size_t i = 0; i < records.size(); ++i) {
    const json& rec = records[i];
    const std::string rid = record_label("mmlu", i);
    std::string question;
    if (!get_string(rec, "question", question) || question.empty()) {
      report_or_throw(out, strict, rid, "missing question");
      continue;
    }
    const json* choices = find_key(rec, "choices");
    if (choices == nullptr || !choices->is_array() || choices->size() < 2) {
      report_or_throw(out, strict, rid, "needs at least 2 choices");
      continue;
    }
    if (choices->size() > 26) {
      report_or_throw(out, strict, rid, "too many choices");
      continue;
    }
    const json* answer = find_key(rec, "answer");
    if (answer == nullptr || !answer->is_number_integer()) {
      report_or_throw(out, strict, rid, "missing choice index");
      continue;
    }
    const long idx = answer->get<long>();
    if (idx < 0 || idx >= static_cast<long>(choices->size())) {
      report_or_throw(out, strict, rid, "choice index out of range");
      continue;
    }
    bool bad_choice = false;
    std::string prompt = question;
    for (size_t c = 0; c < choices->size(); ++c) {
      if (!(*choices)[c].is_string()) {
        report_or_throw(out, strict, rid, "non-string choice");
        bad_choice = true;
        break;
      }
      prompt += '\n';
      prompt += static_cast<char>('A' + c);
      prompt += ". ";
      prompt += (*choices)[c].get<std::string>();
    }
    if (bad_choice) continue;
    prompt += '\n';
    prompt += kMmluInstruction;

    std::string topic;
    get_string(rec, "subject", topic);
    out.examples.push_back(Example{rid, "mmlu", topic, std::move(prompt),
                                   (*choices)[idx].get<std::string>()});
  }
  return out;
}

AdaptResult adapt_truthfulqa(const std::vector<json>& records, bool strict) {
  AdaptResult out;
  for (size_t i = 0; i < records.size(); ++i) {
    const json& rec = records[i];
    const std::string rid = record_label("truthfulqa", i);
    std::string question;
    if (!get_string(rec, "question", question) || question.empty()) {
      report_or_throw(out, strict, rid, "missing question");
      continue;
    }
    const json* truthful = find_key(rec, "correct_answers");
    const json* untruthful = find_key(rec, "incorrect_answers");
    if ((truthful != nullptr && !truthful->is_array()) ||
        (untruthful != nullptr && !untruthful->is_array())) {
      report_or_throw(out, strict, rid, "answers must be arrays");
      continue;
    }
    const size_t n_true = truthful ? truthful->size() : 0;
    const size_t n_false = untruthful ? untruthful->size() : 0;
    if (n_true + n_false == 0) {
      // A question with no candidates is reported even in strict mode; there
      // is nothing to expand.
      out.skipped.push_back({rid, "no candidate answers"});
      continue;
    }
    size_t cand = 0;
    const auto emit = [&](const json& answer, const char* reference) {
      std::string text = answer.is_string() ? answer.get<std::string>() : answer.dump();
      char suffix[16];
      std::snprintf(suffix, sizeof(suffix), "-%02zu", cand++);
      std::string prompt = "Question: " + question + "\nAnswer: " + text + "\n" +
                           kTruthfulqaInstruction;
      out.examples.push_back(Example{rid + suffix, "truthfulqa", "", std::move(prompt),
                                     reference});
    };
    if (truthful) {
      for (const json& a : *truthful) emit(a, "True");
    }
    if (untruthful) {
      for (const json& a : *untruthful) emit(a, "False");
    }
  }
  return out;
}

AdaptResult adapt_gsm8k(const std::vector<json>& records, bool strict) {
  AdaptResult out;
  for (size_t i = 0; i < records.size(); ++i) {
    const json& rec = records[i];
    const std::string rid = record_label("gsm8k", i);
    std::string question;
    std::string solution;
    if (!get_string(rec, "question", question) || question.empty()) {
      report_or_throw(out, strict, rid, "missing question");
      continue;
    }
    if (!get_string(rec, "answer", solution)) {
      report_or_throw(out, strict, rid, "missing solution text");
      continue;
    }
    const size_t pos = solution.rfind(kGsm8kMarker);
    if (pos == std::string::npos) {
      report_or_throw(out, strict, rid, "no final-answer marker");
      continue;
    }
    // Verbatim extraction: only the marker and surrounding whitespace go.
    const std::string reference = trim_ws(
        std::string_view(solution).substr(pos + std::char_traits<char>::length(kGsm8kMarker)));
    if (reference.empty()) {
      report_or_throw(out, strict, rid, "empty final answer");
      continue;
    }
    out.examples.push_back(Example{rid, "gsm8k", "",
                                   question + "\n" + kGsm8kInstruction, reference});
  }
  return out;
}

AdaptResult adapt_lambada(const std::vector<json>& records, bool strict) {
  AdaptResult out;
  const metrics::NormalizationOptions ref_opts{true, true, true};
  for (size_t i = 0; i < records.size(); ++i) {
    const json& rec = records[i];
    const std::string rid = record_label("lambada", i);
    std::string passage;
    if (!get_string(rec, "text", passage)) {
      report_or_throw(out, strict, rid, "missing passage text");
      continue;
    }
    const std::string trimmed = rtrim_ws(passage);
    const std::vector<std::string> words = split_ws(trimmed);
    if (words.size() < 2) {
      report_or_throw(out, strict, rid, "passage needs at least 2 words");
      continue;
    }
    const std::vector<std::string> ref_tokens = metrics::normalize(words.back(), ref_opts);
    if (ref_tokens.size() != 1) {
      report_or_throw(out, strict, rid, "last word empty after normalization");
      continue;
    }
    const std::string prefix = rtrim_ws(
        std::string_view(trimmed).substr(0, trimmed.size() - words.back().size()));
    out.examples.push_back(Example{rid, "lambada", "",
                                   std::string(kLambadaInstruction) + "\n" + prefix,
                                   ref_tokens.front()});
  }
  return out;
}

AdaptResult adapt_passthrough(const std::vector<json>& records,
                              const std::string& dataset_tag, bool strict) {
  const char* prompt_key = "prompt";
  const char* reference_key = "reference";
  const char* topic_key = "topic";
  if (dataset_tag == "dolly") {
    prompt_key = "instruction";
    reference_key = "response";
    topic_key = "category";
  } else if (dataset_tag == "sciq") {
    prompt_key = "question";
    reference_key = "correct_answer";
  }
  AdaptResult out;
  for (size_t i = 0; i < records.size(); ++i) {
    const json& rec = records[i];
    const std::string rid = record_label(dataset_tag, i);
    std::string prompt;
    std::string reference;
    if (!get_string(rec, prompt_key, prompt) || prompt.empty()) {
      report_or_throw(out, strict, rid, std::string("missing ") + prompt_key);
      continue;
    }
    if (!get_string(rec, reference_key, reference)) {
      report_or_throw(out, strict, rid, std::string("missing ") + reference_key);
      continue;
    }
    std::string topic;
    if (topic_key != nullptr) get_string(rec, topic_key, topic);
    out.examples.push_back(
        Example{rid, dataset_tag, std::move(topic), std::move(prompt), std::move(reference)});
  }
  return out;
}

bool known_dataset(const std::string& tag) {
  return tag == "mmlu" || tag == "truthfulqa" || tag == "gsm8k" || tag == "lambada" ||
         tag == "dolly" || tag == "sciq" || tag == "passthrough";
}

AdaptResult adapt(const std::string& tag, const std::vector<json>& records, bool strict) {
  if (tag == "mmlu") return adapt_mmlu(records, strict);
  if (tag == "truthfulqa") return adapt_truthfulqa(records, strict);
  if (tag == "gsm8k") return adapt_gsm8k(records, strict);
  if (tag == "lambada") return adapt_lambada(records, strict);
  if (tag == "dolly" || tag == "sciq" || tag == "passthrough") {
    return adapt_passthrough(records, tag, strict);
  }
  throw std::invalid_argument("unknown dataset tag: " + tag);
}

void validate(const Corpus& corpus) {
  std::set<std::string_view> seen;
  for (const Example& ex : corpus.examples) {
    if (ex.id.empty()) throw std::invalid_argument("example with empty id");
    if (ex.prompt.empty()) throw std::invalid_argument("example " + ex.id + ": empty prompt");
    if (!seen.insert(ex.id).second) {
      throw std::invalid_argument("duplicate example id: " + ex.id);
    }
  }
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  validate(corpus);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write corpus file: " + path);
  json header{{"format", "herd-corpus"}, {"version", kCorpusFormatVersion}};
  out << header.dump() << '\n';
  for (const Example& ex : corpus.examples) {
    json line{{"id", ex.id},
              {"dataset", ex.dataset},
              {"topic", ex.topic},
              {"prompt", ex.prompt},
              {"reference", ex.reference}};
    out << line.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  std::string line;
  size_t lineno = 0;
  Corpus corpus;
  bool saw_header = false;
  const auto fail = [&](const std::string& reason) -> std::runtime_error {
    return std::runtime_error(path + ": line " + std::to_string(lineno) + ": " + reason);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (trim_ws(line).empty()) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      throw fail(e.what());
    }
    if (!saw_header) {
      std::string format;
      if (!get_string(doc, "format", format) || format != "herd-corpus") {
        throw fail("not a herd-corpus file");
      }
      const json* version = find_key(doc, "version");
      if (version == nullptr || !version->is_number_integer() ||
          version->get<int>() != kCorpusFormatVersion) {
        throw fail("unknown corpus format version");
      }
      saw_header = true;
      continue;
    }
    Example ex;
    if (!get_string(doc, "id", ex.id) || !get_string(doc, "dataset", ex.dataset) ||
        !get_string(doc, "topic", ex.topic) || !get_string(doc, "prompt", ex.prompt) ||
        !get_string(doc, "reference", ex.reference)) {
      throw fail("missing example field");
    }
    corpus.examples.push_back(std::move(ex));
  }
  if (!saw_header) throw std::runtime_error(path + ": empty file, expected corpus header");
  validate(corpus);
  return corpus;
}

std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double train_fraction) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw std::invalid_argument("train_fraction must be in [0,1]");
  }
  Corpus train;
  train.split = Split::train;
  Corpus validation;
  validation.split = Split::validation;
  for (const Example& ex : corpus.examples) {
    if (hashing::to_unit(hashing::mix(hashing::fnv1a(ex.id))) < train_fraction) {
      train.examples.push_back(ex);
    } else {
      validation.examples.push_back(ex);
    }
  }
  return {std::move(train), std::move(validation)};
}

}  // namespace herd::data
