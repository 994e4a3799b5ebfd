#pragma once

#include "vqa/api.hpp"

namespace vqa {

/// Something that carries API requests: an in-process router or HTTP.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual api::Response send(const api::Request& request) = 0;

  /// Sends and decodes a JSON reply, rethrowing API errors as vqa::Error.
  json call(const std::string& method, const std::string& path, const json& body = nullptr,
            std::map<std::string, std::string> query = {}) {
    api::Request req{method, path, std::move(query), body.is_null() ? std::string{} : body.dump()};
    return decode(send(req));
  }

  static json decode(const api::Response& res) {
    json body;
    try {
      body = json::parse(res.body);
    } catch (const json::exception&) {
      fail(ErrorCode::TransportError, "non-JSON response with status " + std::to_string(res.status));
    }
    if (res.status >= 400) {
      const auto code = body.value("code", std::string{"TransportError"});
      throw RemoteError(code, body.value("message", std::string{}), res.status);
    }
    return body;
  }

  /// An error reported by the far side. Keeps the wire code verbatim.
  class RemoteError : public Error {
   public:
    RemoteError(std::string code, const std::string& message, int status)
        : Error(ErrorCode::TransportError, code + ": " + message), wire_code_(std::move(code)), status_(status) {}
    const std::string& wire_code() const { return wire_code_; }
    int status() const { return status_; }

   private:
    std::string wire_code_;
    int status_;
  };
};

class LoopbackTransport : public Transport {
 public:
  explicit LoopbackTransport(api::Router& router) : router_(router) {}
  api::Response send(const api::Request& request) override { return router_.handle(request); }

 private:
  api::Router& router_;
};

}  // namespace vqa
