#pragma once

#include <httplib.h>

#include <filesystem>
#include <optional>
#include <string>

#include "vqa/transport.hpp"

namespace vqa {

/// HTTP front end for api::Router. Static webapp assets, when given, are
/// served from `/`; byte ranges on /media are applied by httplib.
class HttpServer {
 public:
  HttpServer(api::Router& router, std::optional<std::filesystem::path> assets = {}) : router_(router) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) { forward(req, res); };
    server_.Get(R"(/(healthz|api/.*|media/.*))", handler);
    server_.Post(R"(/api/.*)", handler);
    if (assets && std::filesystem::is_directory(*assets)) {
      server_.set_mount_point("/", assets->string());
    } else {
      server_.Get("/", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("<!doctype html><title>vqa</title><p>Webapp assets not installed.</p>", "text/html");
      });
    }
    server_.set_payload_max_length(std::size_t{4} << 30);
    // httplib's default also sets SO_REUSEPORT, which would let a second
    // server share the port instead of failing to bind.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
    });
  }

  /// Binds without serving. Port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port) {
    const int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) fail(ErrorCode::BindFailure, "cannot bind " + host + ":" + std::to_string(port));
    return bound;
  }

  /// Serves until stop() is called.
  void run() { server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() { server_.wait_until_ready(); }

 private:
  void forward(const httplib::Request& req, httplib::Response& res) {
    api::Request r{req.method, req.path, {}, req.body};
    for (const auto& [k, v] : req.params) r.query[k] = v;
    if (req.is_multipart_form_data()) {
      for (const auto& [name, file] : req.files) {
        if (!file.filename.empty() || name == "video") {
          r.body = file.content;
          if (!file.filename.empty()) r.query["file_name"] = file.filename;
        } else {
          r.query[name] = file.content;
        }
      }
    }
    const auto out = router_.handle(r);
    // Left unset on success so httplib can answer Range requests with 206.
    if (out.status != 200 || req.ranges.empty()) res.status = out.status;
    for (const auto& [k, v] : out.headers) res.set_header(k, v);
    res.set_content(out.body, out.content_type);
  }

  api::Router& router_;
  httplib::Server server_;
};

class HttpTransport : public Transport {
 public:
  explicit HttpTransport(std::string base_url) : base_url_(std::move(base_url)) {}

  api::Response send(const api::Request& request) override {
    httplib::Client client(base_url_);
    client.set_read_timeout(60, 0);
    std::string path = request.path;
    if (!request.query.empty()) {
      httplib::Params params(request.query.begin(), request.query.end());
      path += "?" + httplib::detail::params_to_query_str(params);
    }
    httplib::Result result = request.method == "POST"
                                 ? client.Post(path, request.body, request.content_type)
                                 : client.Get(path);
    if (!result) {
      fail(ErrorCode::TransportError, "request to " + base_url_ + " failed: " + httplib::to_string(result.error()));
    }
    api::Response res{result->status, result->get_header_value("Content-Type"), result->body, {}};
    for (const auto& [k, v] : result->headers) res.headers[k] = v;
    return res;
  }

 private:
  std::string base_url_;
};

}  // namespace vqa
