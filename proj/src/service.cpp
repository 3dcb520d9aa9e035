#include "herd/service.hpp"

#include "httplib.h"

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <thread>

namespace herd::service {

using json = nlohmann::json;

namespace {

json norm_opts_to_json(const metrics::NormalizationOptions& o) {
  return json{{"lowercase", o.lowercase},
              {"strip_punctuation", o.strip_punctuation},
              {"collapse_whitespace", o.collapse_whitespace}};
}

metrics::NormalizationOptions norm_opts_from_json(const json& j) {
  metrics::NormalizationOptions o;
  o.lowercase = j.value("lowercase", true);
  o.strip_punctuation = j.value("strip_punctuation", true);
  o.collapse_whitespace = j.value("collapse_whitespace", true);
  return o;
}

}  // namespace

HerdConfig config_from_json(const json& doc) {
  HerdConfig config;
  if (!doc.contains("herd") || !doc["herd"].is_array() || doc["herd"].empty()) {
    throw std::invalid_argument("config needs a non-empty herd array");
  }
  for (const json& m : doc["herd"]) {
    backends::ModelDescriptor model;
    model.model_id = m.value("model_id", "");
    model.size_b = m.value("size_b", 0.0);
    model.kind = backends::backend_kind_from_string(m.value("kind", "stub"));
    model.endpoint = m.value("endpoint", "");
    if (m.contains("stub")) {
      const json& s = m["stub"];
      model.stub.default_p = s.value("default_p", 0.0);
      model.stub.wrong_answer = s.value("wrong_answer", "INCORRECT");
      model.stub.seed = s.value("seed", uint64_t{0});
      if (s.contains("expertise")) {
        for (const auto& [topic, p] : s["expertise"].items()) {
          model.stub.expertise[topic] = p.get<double>();
        }
      }
    }
    config.herd.push_back(std::move(model));
  }
  backends::validate_herd(config.herd);

  config.router_path = doc.value("router_path", "");
  if (doc.contains("policy")) {
    config.default_policy.lambda = doc["policy"].value("lambda", 0.0);
    triage::validate(config.default_policy);
  }
  if (doc.contains("metrics")) {
    const json& m = doc["metrics"];
    if (m.contains("defaults")) config.metrics.defaults = norm_opts_from_json(m["defaults"]);
    if (m.contains("per_dataset")) {
      for (const auto& [dataset, opts] : m["per_dataset"].items()) {
        config.metrics.per_dataset[dataset] = norm_opts_from_json(opts);
      }
    }
  }
  if (doc.contains("listen")) {
    config.listen_host = doc["listen"].value("host", "127.0.0.1");
    config.listen_port = doc["listen"].value("port", 8080);
  }
  config.parallelism = doc.value("parallelism", 4);
  if (config.parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");
  if (doc.contains("completion")) {
    const json& c = doc["completion"];
    config.completion.timeout = std::chrono::milliseconds(c.value("timeout_ms", 30000));
    config.completion.max_retries = c.value("max_retries", 3);
    config.completion.max_tokens = c.value("max_tokens", 256);
  }
  return config;
}

json config_to_json(const HerdConfig& config) {
  json herd = json::array();
  for (const backends::ModelDescriptor& m : config.herd) {
    json entry{{"model_id", m.model_id},
               {"size_b", m.size_b},
               {"kind", backends::to_string(m.kind)}};
    if (m.kind == backends::BackendKind::remote) {
      entry["endpoint"] = m.endpoint;
    } else {
      json expertise = json::object();
      for (const auto& [topic, p] : m.stub.expertise) expertise[topic] = p;
      entry["stub"] = json{{"expertise", expertise},
                           {"default_p", m.stub.default_p},
                           {"wrong_answer", m.stub.wrong_answer},
                           {"seed", m.stub.seed}};
    }
    herd.push_back(std::move(entry));
  }
  json per_dataset = json::object();
  for (const auto& [dataset, opts] : config.metrics.per_dataset) {
    per_dataset[dataset] = norm_opts_to_json(opts);
  }
  return json{
      {"herd", herd},
      {"router_path", config.router_path},
      {"policy", json{{"lambda", config.default_policy.lambda}}},
      {"metrics",
       json{{"defaults", norm_opts_to_json(config.metrics.defaults)},
            {"per_dataset", per_dataset}}},
      {"listen", json{{"host", config.listen_host}, {"port", config.listen_port}}},
      {"parallelism", config.parallelism},
      {"completion",
       json{{"timeout_ms", config.completion.timeout.count()},
            {"max_retries", config.completion.max_retries},
            {"max_tokens", config.completion.max_tokens}}}};
}

HerdConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  try {
    return config_from_json(doc);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": " + e.what());
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void save_config(const HerdConfig& config, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  out << config_to_json(config).dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// RouteService
// ---------------------------------------------------------------------------

struct RouteService::Impl {
  HerdConfig config;
  router::RouterModel model;
  httplib::Server server;
  std::thread server_thread;
  std::unique_ptr<std::atomic<uint64_t>[]> counters;
  int bound_port = 0;

  struct RouteDecision {
    size_t index;
    std::vector<double> scores;
    std::vector<double> utilities;
  };

  RouteDecision decide(const std::string& prompt, double lambda) {
    RouteDecision d;
    d.scores = router::predict(model, prompt);
    d.utilities.resize(d.scores.size());
    for (size_t j = 0; j < d.scores.size(); ++j) {
      d.utilities[j] = d.scores[j] - lambda * config.herd[j].size_b;
    }
    std::vector<double> sizes;
    sizes.reserve(config.herd.size());
    for (const auto& m : config.herd) sizes.push_back(m.size_b);
    d.index = triage::route(d.scores, sizes, model.model_ids, lambda);
    counters[d.index].fetch_add(1, std::memory_order_relaxed);
    return d;
  }

  // Returns the parsed prompt/lambda or answers with a 400.
  bool parse_request(const httplib::Request& req, httplib::Response& res,
                     std::string& prompt, double& lambda) {
    const auto reject = [&](const char* message) {
      res.status = 400;
      res.set_content(json{{"error", message}}.dump(), "application/json");
      return false;
    };
    const json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      return reject("request body must be a JSON object");
    }
    if (!body.contains("prompt") || !body["prompt"].is_string() ||
        body["prompt"].get_ref<const std::string&>().empty()) {
      return reject("prompt must be a non-empty string");
    }
    prompt = body["prompt"].get<std::string>();
    lambda = config.default_policy.lambda;
    if (body.contains("lambda")) {
      if (!body["lambda"].is_number()) return reject("lambda must be a number");
      lambda = body["lambda"].get<double>();
    }
    if (!(lambda >= 0.0)) return reject("lambda must be >= 0");
    return true;
  }

  void install_handlers() {
    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("ok", "text/plain");
    });

    server.Post("/v1/route", [this](const httplib::Request& req, httplib::Response& res) {
      std::string prompt;
      double lambda = 0.0;
      if (!parse_request(req, res, prompt, lambda)) return;
      const RouteDecision d = decide(prompt, lambda);
      json scores = json::object();
      json utilities = json::object();
      for (size_t j = 0; j < model.model_ids.size(); ++j) {
        scores[model.model_ids[j]] = d.scores[j];
        utilities[model.model_ids[j]] = d.utilities[j];
      }
      res.set_content(json{{"model_id", model.model_ids[d.index]},
                           {"scores", scores},
                           {"utilities", utilities}}
                          .dump(),
                      "application/json");
    });

    server.Post("/v1/complete", [this](const httplib::Request& req, httplib::Response& res) {
      std::string prompt;
      double lambda = 0.0;
      if (!parse_request(req, res, prompt, lambda)) return;
      const RouteDecision d = decide(prompt, lambda);
      const backends::ModelDescriptor& chosen = config.herd[d.index];
      try {
        const std::string text = backends::complete(chosen, prompt, config.completion);
        res.set_content(json{{"model_id", chosen.model_id}, {"text", text}}.dump(),
                        "application/json");
      } catch (const std::exception& e) {
        res.status = 502;
        res.set_content(json{{"error", e.what()}, {"model_id", chosen.model_id}}.dump(),
                        "application/json");
      }
    });

    server.Get("/v1/models", [this](const httplib::Request&, httplib::Response& res) {
      json models = json::array();
      for (size_t j = 0; j < config.herd.size(); ++j) {
        models.push_back(json{{"model_id", config.herd[j].model_id},
                              {"size_b", config.herd[j].size_b},
                              {"kind", backends::to_string(config.herd[j].kind)},
                              {"routed", counters[j].load(std::memory_order_relaxed)}});
      }
      res.set_content(json{{"models", models}}.dump(), "application/json");
    });
  }
};

RouteService::RouteService(HerdConfig config, router::RouterModel model)
    : impl_(std::make_unique<Impl>()) {
  backends::validate_herd(config.herd);
  router::validate_against_herd(model, config.herd);
  impl_->config = std::move(config);
  impl_->model = std::move(model);
  impl_->counters = std::make_unique<std::atomic<uint64_t>[]>(impl_->config.herd.size());
  for (size_t j = 0; j < impl_->config.herd.size(); ++j) impl_->counters[j] = 0;
  impl_->install_handlers();
}

RouteService::~RouteService() { stop(); }

int RouteService::start() {
  if (impl_->config.listen_port == 0) {
    impl_->bound_port = impl_->server.bind_to_any_port(impl_->config.listen_host);
  } else {
    if (!impl_->server.bind_to_port(impl_->config.listen_host, impl_->config.listen_port)) {
      throw std::runtime_error("cannot bind " + impl_->config.listen_host + ":" +
                               std::to_string(impl_->config.listen_port));
    }
    impl_->bound_port = impl_->config.listen_port;
  }
  if (impl_->bound_port <= 0) {
    throw std::runtime_error("cannot bind " + impl_->config.listen_host);
  }
  impl_->server_thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->bound_port;
}

void RouteService::stop() {
  if (impl_->server_thread.joinable()) {
    impl_->server.stop();
    impl_->server_thread.join();
  }
}

int RouteService::port() const { return impl_->bound_port; }

std::vector<uint64_t> RouteService::allocation_counts() const {
  std::vector<uint64_t> out(impl_->config.herd.size());
  for (size_t j = 0; j < out.size(); ++j) {
    out[j] = impl_->counters[j].load(std::memory_order_relaxed);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Blocking server with signal-driven drain
// ---------------------------------------------------------------------------

namespace {

volatile std::sig_atomic_t g_shutdown = 0;

void on_signal(int) { g_shutdown = 1; }

}  // namespace

int run_server(HerdConfig config, router::RouterModel model) {
  RouteService service(std::move(config), std::move(model));
  const int port = service.start();
  std::printf("herd service listening on port %d\n", port);
  std::fflush(stdout);

  g_shutdown = 0;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_shutdown) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  std::printf("shutting down\n");
  service.stop();
  return 0;
}

}  // namespace herd::service
