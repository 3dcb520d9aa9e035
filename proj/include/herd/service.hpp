#pragma once

#include "herd/backend.hpp"
#include "herd/router.hpp"
#include "herd/triage.hpp"

#include <memory>
#include <string>
#include <vector>

namespace herd::service {

struct HerdConfig {
  std::vector<backends::ModelDescriptor> herd;
  std::string router_path;
  triage::SelectionPolicy default_policy;
  backends::MetricConfig metrics;
  std::string listen_host = "127.0.0.1";
  int listen_port = 8080;  // 0 binds an ephemeral port
  int parallelism = 4;
  backends::CompletionOptions completion;
};

HerdConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const HerdConfig& config);
HerdConfig load_config(const std::string& path);
void save_config(const HerdConfig& config, const std::string& path);

// Online routing endpoint.
//
//   POST /v1/route    {prompt, lambda?} -> {model_id, scores, utilities}
//   POST /v1/complete {prompt, lambda?} -> {model_id, text}
//   GET  /v1/models   -> roster with sizes and allocation counters
//   GET  /healthz     -> 200 "ok"
//
// The constructor refuses a router whose roster does not match the herd
// config exactly. RouterModel and HerdConfig are immutable after startup;
// allocation counters update atomically.
class RouteService {
 public:
  RouteService(HerdConfig config, router::RouterModel model);
  ~RouteService();
  RouteService(const RouteService&) = delete;
  RouteService& operator=(const RouteService&) = delete;

  // Binds and serves on a background thread; returns the bound port.
  int start();
  // Stops accepting connections and drains in-flight handlers.
  void stop();

  int port() const;
  std::vector<uint64_t> allocation_counts() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Blocking entry point used by the serve command: runs until SIGINT/SIGTERM,
// then drains. Returns a process exit code.
int run_server(HerdConfig config, router::RouterModel model);

}  // namespace herd::service
