#include "xnec/http_server.hpp"

#include <cstdlib>
#include <fstream>
#include <regex>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "xnec/error.hpp"

namespace xnec::annotation {

using nlohmann::json;

ServerConfig load_server_config(const std::optional<std::filesystem::path>& file) {
  ServerConfig c;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw Error(Errc::not_found, "config file not found: " + file->string(), "config");
    try {
      const json j = json::parse(in);
      if (j.contains("host")) c.host = j["host"].get<std::string>();
      if (j.contains("port")) c.port = j["port"].get<int>();
      if (j.contains("manifest")) c.manifest = j["manifest"].get<std::string>();
      if (j.contains("log")) c.log = j["log"].get<std::string>();
      if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
      if (j.contains("annotators")) c.annotators = j["annotators"].get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw Error(Errc::validation, "config " + file->string() + ": " + e.what(), "config");
    }
  }
  if (const char* v = std::getenv("XNEC_HOST")) c.host = v;
  if (const char* v = std::getenv("XNEC_PORT")) {
    char* end = nullptr;
    const long port = std::strtol(v, &end, 10);
    if (*v == '\0' || *end != '\0' || port < 0 || port > 65535) throw Error(Errc::validation, "XNEC_PORT is not a port", "port");
    c.port = static_cast<int>(port);
  }
  if (const char* v = std::getenv("XNEC_MANIFEST")) c.manifest = v;
  if (const char* v = std::getenv("XNEC_LOG")) c.log = v;
  if (const char* v = std::getenv("XNEC_SEED")) {
    char* end = nullptr;
    const unsigned long long seed = std::strtoull(v, &end, 10);
    if (*v == '\0' || *end != '\0') throw Error(Errc::validation, "XNEC_SEED is not an integer", "seed");
    c.seed = seed;
  }
  return c;
}

namespace {

int status_of(Errc code) {
  switch (code) {
    case Errc::unknown_id:
    case Errc::not_found: return 404;
    case Errc::conflict: return 409;
    case Errc::io: return 500;
    default: return 400;
  }
}

void send_error(httplib::Response& res, const Error& e) {
  res.status = status_of(e.code());
  const json body = {{"error", to_string(e.code())}, {"field", e.field()}, {"message", e.what()}};
  res.set_content(body.dump(), "application/json");
}

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(json{{"error", "internal"}, {"field", ""}, {"message", e.what()}}.dump(), "application/json");
    }
  };
}

}  // namespace

struct HttpServer::Impl {
  AnnotationService& service;
  httplib::Server server;
  explicit Impl(AnnotationService& s) : service(s) {}
};

HttpServer::HttpServer(AnnotationService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& svc = impl_->service;
  auto& s = impl_->server;
  s.set_payload_max_length(1 << 20);

  s.Get(R"(/session/([^/]+)/next)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
          const Assignment a = svc.next_clip(req.matches[1]);
          json j = {{"done", a.done}, {"position", a.position}, {"total", a.total}};
          if (!a.done) {
            j["vid"] = a.vid;
            j["duration"] = a.duration;
            j["frame_count"] = a.frame_count;
            j["video_url"] = "/clips/" + a.vid + "/video";
          }
          res.set_content(j.dump(), "application/json");
        }));

  s.Post("/annotations", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
           const AnnotationEvent e = event_from_json(req.body);
           svc.submit(e);
           res.status = 201;
           res.set_content(json{{"status", "stored"}, {"vid", e.vid}, {"annotator_id", e.annotator_id}}.dump(),
                           "application/json");
         }));

  s.Put(R"(/annotations/([^/]+)/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
          json j;
          try {
            j = json::parse(req.body);
          } catch (const json::exception& ex) {
            throw Error(Errc::validation, std::string("malformed JSON: ") + ex.what(), "body");
          }
          if (!j.is_object()) throw Error(Errc::validation, "expected a JSON object", "body");
          j["vid"] = std::string(req.matches[1]);
          j["annotator_id"] = std::string(req.matches[2]);
          const AnnotationEvent e = event_from_json(j.dump());
          svc.fine_tune(e);
          res.set_content(json{{"status", "stored"}, {"vid", e.vid}, {"annotator_id", e.annotator_id}}.dump(),
                          "application/json");
        }));

  s.Get("/export.csv", guarded([&svc](const httplib::Request&, httplib::Response& res) {
          const Export e = svc.export_all();
          res.set_header("X-Export-Complete", e.complete ? "true" : "false");
          res.set_content(e.csv, "text/csv");
        }));

  s.Get("/export/manifest.json", guarded([&svc](const httplib::Request&, httplib::Response& res) {
          res.set_content(svc.export_manifest_json(), "application/json");
        }));

  s.Get(R"(/clips/([^/]+)/video)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
          const auto path = svc.video_path(req.matches[1]);
          std::ifstream in(path, std::ios::binary);
          if (!in) throw Error(Errc::not_found, "video file missing for clip '" + std::string(req.matches[1]) + "'", "vid");
          std::string bytes((std::istreambuf_iterator<char>(in)), {});
          res.set_content(std::move(bytes), "application/octet-stream");
        }));

  s.Get("/health", guarded([&svc](const httplib::Request&, httplib::Response& res) {
          res.set_content(json{{"status", "ok"}, {"clips", svc.corpus().clips.size()}, {"events", svc.event_count()}}.dump(),
                          "application/json");
        }));
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(Errc::io, "cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) throw Error(Errc::io, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace xnec::annotation
