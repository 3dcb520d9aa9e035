#include "herd/backend.hpp"

#include "herd/hashing.hpp"

#include "httplib.h"
#include "json.hpp"

#include <set>
#include <sstream>

namespace herd::backends {

using json = nlohmann::json;

const char* to_string(BackendKind kind) {
  return kind == BackendKind::remote ? "remote" : "stub";
}

BackendKind backend_kind_from_string(const std::string& s) {
  if (s == "remote") return BackendKind::remote;
  if (s == "stub") return BackendKind::stub;
  throw std::invalid_argument("unknown backend kind: " + s);
}

void validate(const ModelDescriptor& model) {
  if (model.model_id.empty()) throw std::invalid_argument("model_id must be non-empty");
  if (!(model.size_b > 0.0)) {
    throw std::invalid_argument("model " + model.model_id + ": size_b must be > 0");
  }
  if (model.kind == BackendKind::remote && model.endpoint.empty()) {
    throw std::invalid_argument("model " + model.model_id + ": remote backend needs endpoint");
  }
  const auto check_p = [&](double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument("model " + model.model_id +
                                  ": stub probability out of [0,1]");
    }
  };
  check_p(model.stub.default_p);
  for (const auto& [topic, p] : model.stub.expertise) {
    if (topic.empty()) {
      throw std::invalid_argument("model " + model.model_id + ": empty expertise topic");
    }
    check_p(p);
  }
}

void validate_herd(const std::vector<ModelDescriptor>& herd) {
  if (herd.empty()) throw std::invalid_argument("herd must be non-empty");
  std::set<std::string_view> ids;
  for (const ModelDescriptor& m : herd) {
    validate(m);
    if (!ids.insert(m.model_id).second) {
      throw std::invalid_argument("duplicate model_id: " + m.model_id);
    }
  }
}

std::optional<std::string> find_marker(std::string_view prompt, std::string_view name) {
  std::string needle = "@";
  needle += name;
  needle += '{';
  const size_t start = prompt.find(needle);
  if (start == std::string_view::npos) return std::nullopt;
  const size_t open = start + needle.size();
  const size_t close = prompt.find('}', open);
  if (close == std::string_view::npos) return std::nullopt;
  return std::string(prompt.substr(open, close - open));
}

namespace {

std::optional<std::string> topic_for(const StubProfile& profile, std::string_view prompt) {
  if (auto marked = find_marker(prompt, "topic")) return marked;
  // Fall back to scanning prompt words against the expertise table, first
  // match in prompt order wins.
  std::istringstream iss{std::string(prompt)};
  std::string word;
  while (iss >> word) {
    if (profile.expertise.count(word) > 0) return word;
  }
  return std::nullopt;
}

}  // namespace

std::string stub_complete(const ModelDescriptor& model, std::string_view prompt) {
  const StubProfile& profile = model.stub;
  const std::string example_key =
      find_marker(prompt, "id").value_or(std::string(prompt));

  double p = profile.default_p;
  if (auto topic = topic_for(profile, prompt)) {
    auto it = profile.expertise.find(*topic);
    if (it != profile.expertise.end()) p = it->second;
  }

  // Keyed by (example, model, seed) only, never by call order, so score
  // collection is reproducible at any parallelism.
  const uint64_t stream = hashing::mix(
      hashing::fnv1a(example_key) ^ hashing::mix(hashing::fnv1a(model.model_id) ^ profile.seed));
  if (hashing::to_unit(stream) < p) {
    if (auto reference = find_marker(prompt, "ref")) return *reference;
  }
  return profile.wrong_answer;
}

std::string remote_complete(const ModelDescriptor& model, std::string_view prompt,
                            const CompletionOptions& opts) {
  const std::string& url = model.endpoint;
  if (url.rfind("http://", 0) != 0) {
    throw BackendError(model.model_id, "unsupported endpoint scheme: " + url);
  }
  const size_t path_pos = url.find('/', 7);
  const std::string base = path_pos == std::string::npos ? url : url.substr(0, path_pos);
  const std::string path = path_pos == std::string::npos ? "/" : url.substr(path_pos);

  httplib::Client client(base);
  const auto timeout_ms = opts.timeout.count();
  client.set_connection_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
  client.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
  client.set_write_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);

  const std::string body =
      json{{"prompt", std::string(prompt)}, {"max_tokens", opts.max_tokens}}.dump();

  const int attempts = std::max(1, opts.max_retries);
  std::string last_error;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    httplib::Result res = client.Post(path, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;  // retriable (includes timeouts)
    }
    if (res->status >= 500) {
      last_error = "server error: HTTP " + std::to_string(res->status);
      continue;  // retriable
    }
    if (res->status < 200 || res->status >= 300) {
      throw BackendError(model.model_id, "HTTP " + std::to_string(res->status));
    }
    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("text") || !reply["text"].is_string()) {
      throw BackendError(model.model_id, "malformed completion response");
    }
    return reply["text"].get<std::string>();
  }
  throw BackendError(model.model_id,
                     last_error + " after " + std::to_string(attempts) + " attempts");
}

std::string complete(const ModelDescriptor& model, std::string_view prompt,
                     const CompletionOptions& opts) {
  validate(model);
  return model.kind == BackendKind::stub ? stub_complete(model, prompt)
                                         : remote_complete(model, prompt, opts);
}

}  // namespace herd::backends
