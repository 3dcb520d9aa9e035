#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace herd::backends {

enum class BackendKind { remote, stub };

const char* to_string(BackendKind kind);
BackendKind backend_kind_from_string(const std::string& s);

// Planted-expertise profile for stub backends. Stubs are first-class herd
// members, not test doubles: desk-scale analytics run entirely on them.
//
// A stub reads three optional markers out of the prompt text:
//   @id{...}    key for the per-(example, model) random stream; defaults to
//               the whole prompt
//   @topic{...} expertise lookup key; defaults to the first prompt word that
//               matches an expertise entry
//   @ref{...}   the reference answer echoed back on a "correct" draw; a stub
//               without it can never answer correctly
struct StubProfile {
  std::map<std::string, double> expertise;  // topic -> p(correct answer)
  double default_p = 0.0;                   // for topics not in the table
  std::string wrong_answer = "INCORRECT";
  uint64_t seed = 0;
};

struct ModelDescriptor {
  std::string model_id;
  double size_b = 0.0;  // parameter count in billions
  BackendKind kind = BackendKind::stub;
  std::string endpoint;  // remote only, e.g. http://host:8080/completion
  StubProfile stub;      // stub only
};

void validate(const ModelDescriptor& model);
void validate_herd(const std::vector<ModelDescriptor>& herd);

class BackendError : public std::runtime_error {
 public:
  BackendError(std::string model_id, const std::string& what)
      : std::runtime_error("backend " + model_id + ": " + what),
        model_id_(std::move(model_id)) {}
  const std::string& model_id() const noexcept { return model_id_; }

 private:
  std::string model_id_;
};

struct CompletionOptions {
  std::chrono::milliseconds timeout{30000};
  int max_retries = 3;  // total attempts for retriable failures
  int max_tokens = 256;
};

// Extracts a @name{...} marker from a prompt.
std::optional<std::string> find_marker(std::string_view prompt, std::string_view name);

// Deterministic function of (prompt, profile): the embedded reference with
// probability p(topic) drawn from a stream keyed by (example, model, seed),
// otherwise the fixed wrong answer. Independent of call order.
std::string stub_complete(const ModelDescriptor& model, std::string_view prompt);

// Minimal completion POST: request {"prompt": ..., "max_tokens": ...},
// reply {"text": ...}. Retries transport errors and 5xx up to max_retries;
// 4xx and malformed replies fail immediately.
std::string remote_complete(const ModelDescriptor& model, std::string_view prompt,
                            const CompletionOptions& opts);

std::string complete(const ModelDescriptor& model, std::string_view prompt,
                     const CompletionOptions& opts = {});

}  // namespace herd::backends
