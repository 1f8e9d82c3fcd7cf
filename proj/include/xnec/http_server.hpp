#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "xnec/annotation_service.hpp"

namespace xnec::annotation {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0: pick a free port
  std::filesystem::path manifest;
  std::filesystem::path log = "annotations.log";
  std::uint64_t seed = 0;
  std::vector<std::string> annotators;
};

// JSON file (keys as in ServerConfig, all optional), then environment:
// XNEC_HOST, XNEC_PORT, XNEC_MANIFEST, XNEC_LOG, XNEC_SEED.
ServerConfig load_server_config(const std::optional<std::filesystem::path>& file);

// HTTP+JSON front end:
//   GET  /session/{annotator}/next
//   POST /annotations
//   PUT  /annotations/{vid}/{annotator}
//   GET  /export.csv              (header X-Export-Complete: true|false)
//   GET  /export/manifest.json
//   GET  /clips/{vid}/video
//   GET  /health
// Errors: {"error": code, "field": name, "message": text} with 400 for
// validation, 404 for unknown ids, 409 for clips not assigned to the caller.
class HttpServer {
 public:
  explicit HttpServer(AnnotationService& service);
  ~HttpServer();

  // Binds; port 0 picks a free one. Returns the bound port.
  int bind(const std::string& host, int port);
  // Serves until stop() is called.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace xnec::annotation
