#pragma once

#include <json.hpp>

#include <string>

#include "vqa/aggregation.hpp"
#include "vqa/domain.hpp"
#include "vqa/session.hpp"

// JSON forms of the domain types, shared by the file store and the HTTP API.

namespace vqa {

using json = nlohmann::json;

namespace detail {

template <typename T>
T field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) fail(ErrorCode::BadRequest, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::BadRequest, std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  return field<T>(j, key);
}

}  // namespace detail

inline json to_json(const ScaleConfig& s) { return {{"min", s.min_value}, {"max", s.max_value}, {"step", s.step}}; }

inline ScaleConfig scale_from_json(const json& j) {
  const ScaleConfig defaults;
  return {detail::field_or<double>(j, "min", defaults.min_value), detail::field_or<double>(j, "max", defaults.max_value),
          detail::field_or<double>(j, "step", defaults.step)};
}

inline json to_json(const InputMethodConfig& c) {
  json j{{"kind", std::string(to_string(c.kind))}, {"labels", c.labels}};
  if (c.kind == InputKind::Slider) {
    j["scale"] = to_json(c.scale);
  } else {
    j["level_count"] = c.level_count;
  }
  return j;
}

inline InputMethodConfig input_method_from_json(const json& j) {
  const auto kind = detail::field<std::string>(j, "kind");
  InputMethodConfig c;
  c.labels = detail::field_or<std::vector<std::string>>(j, "labels", {});
  if (kind == "slider") {
    c.kind = InputKind::Slider;
    if (j.contains("scale")) c.scale = scale_from_json(j.at("scale"));
  } else if (kind == "radio") {
    c.kind = InputKind::RadioButtons;
    c.level_count = detail::field_or<int>(j, "level_count", static_cast<int>(c.labels.size()));
  } else {
    fail(ErrorCode::BadRequest, "input kind must be 'slider' or 'radio'");
  }
  return c;
}

inline json to_json(const VideoMeta& v) {
  return {{"file_name", v.file_name}, {"duration_ms", v.duration_ms}, {"content_hash", v.content_hash}};
}

inline VideoMeta video_from_json(const json& j) {
  return {detail::field_or<std::string>(j, "file_name", ""), detail::field<std::int64_t>(j, "duration_ms"),
          detail::field_or<std::string>(j, "content_hash", "")};
}

inline json to_json(const Experiment& e) {
  return {{"id", e.id},
          {"name", e.name},
          {"video", to_json(e.video)},
          {"input_method", to_json(e.input_method)},
          {"created_at", format_utc(e.created_at)}};
}

inline UtcTime utc_from_json(const json& j, const char* key) {
  const auto text = detail::field<std::string>(j, key);
  auto t = parse_utc(text);
  if (!t) fail(ErrorCode::BadRequest, std::string("field '") + key + "' is not an RFC 3339 UTC timestamp");
  return *t;
}

inline Experiment experiment_from_json(const json& j) {
  Experiment e;
  e.id = detail::field_or<std::string>(j, "id", "");
  e.name = detail::field_or<std::string>(j, "name", "");
  if (!j.contains("video")) fail(ErrorCode::BadRequest, "missing field 'video'");
  e.video = video_from_json(j.at("video"));
  if (!j.contains("input_method")) fail(ErrorCode::BadRequest, "missing field 'input_method'");
  e.input_method = input_method_from_json(j.at("input_method"));
  if (j.contains("created_at")) e.created_at = utc_from_json(j, "created_at");
  return e;
}

inline json to_json(const Subject& s) {
  return {{"id", s.id}, {"experiment_id", s.experiment_id}, {"display_name", s.display_name}};
}

inline Subject subject_from_json(const json& j) {
  return {detail::field_or<std::string>(j, "id", ""), detail::field_or<std::string>(j, "experiment_id", ""),
          detail::field_or<std::string>(j, "display_name", "")};
}

inline json to_json(const AssessmentSample& s) {
  return {{"video_time_ms", s.video_time_ms}, {"value", s.value}, {"wall_clock_utc", format_utc(s.wall_clock_utc)}};
}

/// `wall_clock_utc` may be omitted by clients; `fallback` is used then.
inline AssessmentSample sample_from_json(const json& j, UtcTime fallback) {
  AssessmentSample s;
  s.video_time_ms = detail::field<std::int64_t>(j, "video_time_ms");
  s.value = detail::field<double>(j, "value");
  s.wall_clock_utc = j.contains("wall_clock_utc") ? utc_from_json(j, "wall_clock_utc") : fallback;
  return s;
}

/// Session summary without samples.
inline json to_json(const SessionRecord& s) {
  return {{"id", s.id},
          {"experiment_id", s.experiment_id},
          {"subject_id", s.subject_id},
          {"state", std::string(to_string(s.state))},
          {"sample_count", s.samples.size()}};
}

inline json to_json(const SummaryReport& r) {
  json overall = json::object();
  for (const auto& [id, v] : r.mos.per_subject_overall) overall[id] = v;
  json subjects = json::array();
  for (const auto& s : r.subjects) {
    subjects.push_back({{"subject_id", s.subject_id},
                        {"session_id", s.session_id},
                        {"overall", s.overall},
                        {"values", s.series.values}});
  }
  return {{"experiment_id", r.experiment_id},
          {"grid_ms", r.aggregate.grid_step_ms},
          {"mos", {{"mos", r.mos.mos}, {"per_subject_overall", overall}, {"scale", to_json(r.mos.scale)}}},
          {"aggregate",
           {{"grid_step_ms", r.aggregate.grid_step_ms},
            {"subject_count", r.aggregate.subject_count},
            {"mean", r.aggregate.mean},
            {"min", r.aggregate.min},
            {"max", r.aggregate.max},
            {"stddev", r.aggregate.stddev}}},
          {"subjects", subjects}};
}

}  // namespace vqa
