#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "vqa/codec.hpp"
#include "vqa/serialize.hpp"
#include "vqa/service.hpp"
#include "vqa/version.hpp"
#include "vqa/zip.hpp"

namespace vqa::api {

struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
  std::string content_type = "application/json";
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::map<std::string, std::string> headers;

  json json_body() const { return json::parse(body); }
};

inline Response json_response(int status, const json& body) { return {status, "application/json", body.dump(), {}}; }

inline Response error_response(const Error& err) {
  return json_response(http_status(err.code()),
                       {{"code", std::string(to_string(err.code()))}, {"message", err.detail()}});
}

inline std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> parts;
  while (!path.empty()) {
    if (path.front() == '/') {
      path.remove_prefix(1);
      continue;
    }
    const auto slash = path.find('/');
    parts.push_back(path.substr(0, slash));
    if (slash == std::string_view::npos) break;
    path.remove_prefix(slash);
  }
  return parts;
}

/// Maps the HTTP endpoint table onto ExperimentService. Transport-agnostic:
/// the HTTP server and the in-process loopback client both call handle().
class Router {
 public:
  explicit Router(ExperimentService& service) : service_(service) {}

  Response handle(const Request& req) {
    try {
      return dispatch(req);
    } catch (const Error& err) {
      return error_response(err);
    } catch (const json::exception& ex) {
      return error_response(Error(ErrorCode::BadRequest, ex.what()));
    }
  }

 private:
  Response dispatch(const Request& req) {
    const auto p = split_path(req.path);
    const bool get = req.method == "GET" || req.method == "HEAD";
    const bool post = req.method == "POST";

    if (get && p.size() == 1 && p[0] == "healthz") {
      return json_response(200, {{"status", "ok"}, {"version", kVersion}});
    }
    if (get && p.size() == 2 && p[0] == "media") return media(std::string(p[1]));
    if (p.empty() || p[0] != "api") not_found(req);

    if (p.size() >= 2 && p[1] == "experiments") {
      if (p.size() == 2 && post) return create_experiment(parse_body(req));
      if (p.size() == 2 && get) return list_experiments();
      const std::string id(p.size() > 2 ? p[2] : "");
      if (p.size() == 3 && get) return json_response(200, experiment_detail(id));
      if (p.size() == 4 && post && p[3] == "video") return upload_video(id, req);
      if (p.size() == 4 && post && p[3] == "subjects") return add_subject(id, parse_body(req));
      if (p.size() == 4 && get && p[3] == "results") return results(id, req);
      if (p.size() == 4 && get && p[3] == "export") return export_zip(id, req);
    }
    if (p.size() >= 2 && p[1] == "sessions") {
      if (p.size() == 2 && post) return begin_session(parse_body(req));
      const std::string id(p.size() > 2 ? p[2] : "");
      if (p.size() == 3 && get) return json_response(200, to_json(*service_.session(id)));
      if (p.size() == 4 && post && p[3] == "samples") return append(id, parse_body(req));
      if (p.size() == 4 && post && p[3] == "finalize") {
        const auto body = parse_body(req);
        return json_response(
            200, to_json(service_.finalize_session(id, detail::field<std::int64_t>(body, "last_playback_position_ms"))));
      }
      if (p.size() == 4 && post && p[3] == "abandon") return json_response(200, to_json(service_.abandon_session(id)));
    }
    not_found(req);
  }

  [[noreturn]] static void not_found(const Request& req) {
    fail(ErrorCode::NotFound, "no route for " + req.method + " " + req.path);
  }

  static json parse_body(const Request& req) {
    if (req.body.empty()) return json::object();
    try {
      return json::parse(req.body);
    } catch (const json::exception& ex) {
      fail(ErrorCode::BadRequest, std::string("malformed JSON body: ") + ex.what());
    }
  }

  static std::optional<std::int64_t> query_int(const Request& req, const std::string& key) {
    auto it = req.query.find(key);
    if (it == req.query.end() || it->second.empty()) return std::nullopt;
    std::int64_t v = 0;
    if (!parse_int(it->second, v)) fail(ErrorCode::BadRequest, "query parameter '" + key + "' is not an integer");
    return v;
  }

  static bool query_flag(const Request& req, const std::string& key) {
    auto it = req.query.find(key);
    return it != req.query.end() && (it->second == "1" || it->second == "true");
  }

  Response create_experiment(const json& body) {
    Experiment draft = experiment_from_json(body);
    return json_response(201, to_json(service_.create_experiment(std::move(draft))));
  }

  Response list_experiments() {
    json list = json::array();
    for (const auto& e : service_.experiments()) list.push_back(to_json(e));
    return json_response(200, {{"experiments", list}});
  }

  json experiment_detail(const ExperimentId& id) {
    json j = to_json(service_.experiment(id));
    json subjects = json::array();
    const auto sessions = service_.sessions(id);
    for (const auto& s : service_.subjects(id)) {
      json sj = to_json(s);
      json list = json::array();
      for (const auto& session : sessions) {
        if (session->subject_id == s.id) list.push_back(to_json(*session));
      }
      sj["sessions"] = list;
      subjects.push_back(sj);
    }
    j["subjects"] = subjects;
    return j;
  }

  Response upload_video(const ExperimentId& id, const Request& req) {
    if (req.body.empty()) fail(ErrorCode::InvalidVideo, "empty video upload");
    auto name = req.query.contains("file_name") ? req.query.at("file_name") : std::string{};
    const auto video = service_.attach_video(id, req.body, std::move(name), query_int(req, "duration_ms"));
    return json_response(200, to_json(video));
  }

  Response add_subject(const ExperimentId& id, const json& body) {
    return json_response(201,
                         to_json(service_.add_subject(id, detail::field_or<std::string>(body, "display_name", ""))));
  }

  Response begin_session(const json& body) {
    const auto session = service_.begin_session(detail::field<std::string>(body, "experiment_id"),
                                                detail::field<std::string>(body, "subject_id"));
    return json_response(201, to_json(session));
  }

  Response append(const SessionId& id, const json& body) {
    std::optional<std::int64_t> seq;
    if (body.contains("batch_seq") && !body.at("batch_seq").is_null()) {
      seq = detail::field<std::int64_t>(body, "batch_seq");
    }
    const auto& samples = body.contains("samples") ? body.at("samples") : json::array();
    if (!samples.is_array()) fail(ErrorCode::BadRequest, "'samples' must be an array");
    const auto received = now_utc();
    std::vector<AssessmentSample> batch;
    batch.reserve(samples.size());
    for (const auto& s : samples) batch.push_back(sample_from_json(s, received));
    const auto outcome = service_.append_samples(id, batch, seq);
    return json_response(200, {{"accepted", outcome.accepted},
                               {"duplicate", outcome.duplicate},
                               {"sample_count", outcome.sample_count}});
  }

  Response results(const ExperimentId& id, const Request& req) {
    const auto grid = query_int(req, "grid_ms").value_or(kDefaultGridMs);
    return json_response(200, to_json(service_.summary_report(id, grid)));
  }

  Response export_zip(const ExperimentId& id, const Request& req) {
    const auto bundle = service_.export_bundle(id, query_flag(req, "include_incomplete"));
    std::vector<zip::Entry> entries{{kExperimentsFile, bundle.experiments_csv},
                                    {kSubjectsFile, bundle.subjects_csv},
                                    {kSamplesFile, bundle.samples_csv}};
    if (!service_.finalized_traces(id).empty()) {
      entries.emplace_back(kAggregateFile, aggregate_csv(service_.summary_report(id).aggregate));
    }
    Response res{200, "application/zip", zip::write(entries), {}};
    res.headers["Content-Disposition"] = "attachment; filename=\"" + id + ".zip\"";
    return res;
  }

  Response media(const std::string& hash) {
    auto bytes = service_.store().load_media(hash);
    if (!bytes) fail(ErrorCode::NotFound, "no media with hash " + hash);
    Response res{200, "video/mp4", std::move(*bytes), {}};
    res.headers["Accept-Ranges"] = "bytes";
    return res;
  }

  ExperimentService& service_;
};

}  // namespace vqa::api
