#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "vqa/aggregation.hpp"
#include "vqa/csv.hpp"
#include "vqa/store.hpp"

namespace vqa {

inline const csv::Row kExperimentsHeader{"experiment_id", "name",      "video_file", "video_duration_ms",
                                         "video_hash",    "input_kind", "scale_min", "scale_max",
                                         "scale_step",    "level_count", "labels"};
inline const csv::Row kSubjectsHeader{"experiment_id", "subject_id", "display_name", "session_id", "session_state"};
inline const csv::Row kSamplesHeader{"experiment_id", "subject_id", "session_id",
                                     "video_time_ms", "value",      "wall_clock_utc"};

/// The three CSV documents describing one experiment.
struct ExportBundle {
  std::string experiments_csv;
  std::string subjects_csv;
  std::string samples_csv;

  bool operator==(const ExportBundle&) const = default;
};

inline constexpr const char* kExperimentsFile = "experiments.csv";
inline constexpr const char* kSubjectsFile = "subjects.csv";
inline constexpr const char* kSamplesFile = "samples.csv";
inline constexpr const char* kAggregateFile = "aggregate.csv";

inline ExportBundle export_csv(const Store& store, const ExperimentId& experiment_id,
                               bool include_incomplete = false) {
  const Experiment e = store.load_experiment(experiment_id);
  const auto& im = e.input_method;
  const bool slider = im.kind == InputKind::Slider;

  ExportBundle bundle;
  csv::append_row(bundle.experiments_csv, kExperimentsHeader);
  csv::append_row(bundle.experiments_csv,
                  {e.id, e.name, e.video.file_name, std::to_string(e.video.duration_ms), e.video.content_hash,
                   std::string(to_string(im.kind)), slider ? format_shortest(im.scale.min_value) : "",
                   slider ? format_shortest(im.scale.max_value) : "", slider ? format_shortest(im.scale.step) : "",
                   slider ? "" : std::to_string(im.level_count), csv::join(im.labels, '|')});

  std::vector<Subject> subjects;
  for (const auto& id : store.list_subjects(experiment_id)) subjects.push_back(store.load_subject(id));
  std::sort(subjects.begin(), subjects.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

  std::map<SubjectId, std::vector<std::shared_ptr<const SessionRecord>>> by_subject;
  for (const auto& id : store.list_sessions(experiment_id)) {
    auto s = store.load_session(id);
    if (s->state == SessionState::Finalized || include_incomplete) by_subject[s->subject_id].push_back(s);
  }

  struct SampleRow {
    const SubjectId* subject;
    std::int64_t t;
    const SessionId* session;
    const AssessmentSample* sample;
  };
  std::vector<SampleRow> rows;

  csv::append_row(bundle.subjects_csv, kSubjectsHeader);
  for (const auto& subject : subjects) {
    auto& sessions = by_subject[subject.id];
    std::sort(sessions.begin(), sessions.end(), [](const auto& a, const auto& b) { return a->id < b->id; });
    if (sessions.empty()) csv::append_row(bundle.subjects_csv, {e.id, subject.id, subject.display_name, "", ""});
    for (const auto& s : sessions) {
      csv::append_row(bundle.subjects_csv,
                      {e.id, subject.id, subject.display_name, s->id, std::string(to_string(s->state))});
      for (const auto& sample : s->samples) rows.push_back({&s->subject_id, sample.video_time_ms, &s->id, &sample});
    }
  }
  std::sort(rows.begin(), rows.end(), [](const SampleRow& a, const SampleRow& b) {
    return std::tie(*a.subject, a.t, *a.session) < std::tie(*b.subject, b.t, *b.session);
  });

  const int decimals = value_decimals(effective_scale(im));
  csv::append_row(bundle.samples_csv, kSamplesHeader);
  for (const auto& r : rows) {
    csv::append_row(bundle.samples_csv, {e.id, *r.subject, *r.session, std::to_string(r.t),
                                         format_fixed(r.sample->value, decimals),
                                         format_utc(r.sample->wall_clock_utc)});
  }
  return bundle;
}

namespace detail {

inline std::vector<csv::Row> parse_table(const std::string& doc, const csv::Row& header, const char* name) {
  auto rows = csv::parse(doc);
  if (rows.empty() || rows.front() != header) {
    fail(ErrorCode::SchemaError, std::string(name) + " header does not match the expected columns");
  }
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != header.size()) {
      fail(ErrorCode::SchemaError, std::string(name) + " row " + std::to_string(i) + " has " +
                                       std::to_string(rows[i].size()) + " fields");
    }
  }
  rows.erase(rows.begin());
  return rows;
}

inline double number(const std::string& s, const char* what) {
  double v = 0.0;
  if (!parse_double(s, v)) fail(ErrorCode::SchemaError, std::string("bad ") + what + " '" + s + "'");
  return v;
}

inline std::int64_t integer(const std::string& s, const char* what) {
  std::int64_t v = 0;
  if (!parse_int(s, v)) fail(ErrorCode::SchemaError, std::string("bad ") + what + " '" + s + "'");
  return v;
}

inline void require_id(const std::string& id, const char* what) {
  if (!is_valid_id(id)) fail(ErrorCode::SchemaError, std::string("bad ") + what + " '" + id + "'");
}

}  // namespace detail

/// Rebuilds an experiment with its subjects and sessions from a bundle.
/// Ids are preserved; every sample is re-validated. Nothing is written
/// unless the whole bundle is consistent.
inline ExperimentId import_csv(Store& store, const ExportBundle& bundle) {
  const auto exp_rows = detail::parse_table(bundle.experiments_csv, kExperimentsHeader, kExperimentsFile);
  const auto subject_rows = detail::parse_table(bundle.subjects_csv, kSubjectsHeader, kSubjectsFile);
  const auto sample_rows = detail::parse_table(bundle.samples_csv, kSamplesHeader, kSamplesFile);
  if (exp_rows.size() != 1) fail(ErrorCode::SchemaError, "experiments.csv must describe exactly one experiment");

  const auto& er = exp_rows.front();
  Experiment e;
  e.id = er[0];
  detail::require_id(e.id, "experiment_id");
  e.name = er[1];
  e.video = {er[2], detail::integer(er[3], "video_duration_ms"), er[4]};
  e.created_at = now_utc();
  if (er[5] == "slider") {
    e.input_method.kind = InputKind::Slider;
    e.input_method.scale = {detail::number(er[6], "scale_min"), detail::number(er[7], "scale_max"),
                            detail::number(er[8], "scale_step")};
  } else if (er[5] == "radio") {
    e.input_method.kind = InputKind::RadioButtons;
    e.input_method.level_count = static_cast<int>(detail::integer(er[9], "level_count"));
  } else {
    fail(ErrorCode::SchemaError, "unknown input_kind '" + er[5] + "'");
  }
  e.input_method.labels = csv::split(er[10], '|');
  validate_experiment(e);
  if (store.has_experiment(e.id)) fail(ErrorCode::DuplicateId, "experiment " + e.id + " already exists");

  std::map<SubjectId, Subject> subjects;
  std::map<SessionId, SessionRecord> sessions;
  for (const auto& r : subject_rows) {
    if (r[0] != e.id) fail(ErrorCode::IntegrityError, "subject row references unknown experiment " + r[0]);
    detail::require_id(r[1], "subject_id");
    auto [it, inserted] = subjects.try_emplace(r[1], Subject{r[1], e.id, r[2]});
    if (!inserted && it->second.display_name != r[2]) {
      fail(ErrorCode::IntegrityError, "subject " + r[1] + " has conflicting display names");
    }
    if (r[3].empty() && r[4].empty()) continue;
    detail::require_id(r[3], "session_id");
    const auto state = parse_session_state(r[4]);
    if (!state) fail(ErrorCode::SchemaError, "unknown session_state '" + r[4] + "'");
    SessionRecord s;
    s.id = r[3];
    s.experiment_id = e.id;
    s.subject_id = r[1];
    s.state = *state;
    if (!sessions.emplace(s.id, std::move(s)).second) {
      fail(ErrorCode::IntegrityError, "session " + r[3] + " listed twice");
    }
  }

  for (const auto& r : sample_rows) {
    if (r[0] != e.id) fail(ErrorCode::IntegrityError, "sample row references unknown experiment " + r[0]);
    if (!subjects.contains(r[1])) fail(ErrorCode::IntegrityError, "sample references unknown subject " + r[1]);
    auto it = sessions.find(r[2]);
    if (it == sessions.end() || it->second.subject_id != r[1]) {
      fail(ErrorCode::IntegrityError, "sample references unknown session " + r[2]);
    }
    AssessmentSample sample;
    sample.video_time_ms = detail::integer(r[3], "video_time_ms");
    sample.value = detail::number(r[4], "value");
    auto wall = parse_utc(r[5]);
    if (!wall) fail(ErrorCode::SchemaError, "bad wall_clock_utc '" + r[5] + "'");
    sample.wall_clock_utc = *wall;
    it->second.samples.push_back(validate_sample(sample, e.input_method, e.video.duration_ms));
  }

  for (auto& [id, s] : sessions) {
    std::stable_sort(s.samples.begin(), s.samples.end(),
                     [](const auto& a, const auto& b) { return a.video_time_ms < b.video_time_ms; });
    for (std::size_t i = 1; i < s.samples.size(); ++i) {
      if (s.samples[i].video_time_ms == s.samples[i - 1].video_time_ms) {
        fail(ErrorCode::NonMonotonicTime, "session " + id + " has duplicate video times");
      }
    }
    if (s.state == SessionState::Finalized) validate_trace_shape(s.samples, e.video.duration_ms);
  }

  store.save(e);
  try {
    for (const auto& [id, subject] : subjects) store.save(subject);
    for (auto& [id, s] : sessions) store.save(std::move(s));
  } catch (...) {
    store.delete_experiment(e.id, true);
    throw;
  }
  return e.id;
}

/// Per-grid-point aggregate table, written next to the bundle on export.
inline std::string aggregate_csv(const AggregateCurve& curve) {
  std::string doc;
  csv::append_row(doc, {"video_time_ms", "mean", "min", "max", "stddev", "subject_count"});
  for (std::size_t k = 0; k < curve.mean.size(); ++k) {
    csv::append_row(doc, {std::to_string(static_cast<std::int64_t>(k) * curve.grid_step_ms),
                          format_shortest(curve.mean[k]), format_shortest(curve.min[k]),
                          format_shortest(curve.max[k]), format_shortest(curve.stddev[k]),
                          std::to_string(curve.subject_count)});
  }
  return doc;
}

}  // namespace vqa
