#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "vqa/aggregation.hpp"
#include "vqa/codec.hpp"
#include "vqa/media.hpp"
#include "vqa/session.hpp"
#include "vqa/store.hpp"

namespace vqa {

struct ServiceOptions {
  std::int64_t completion_tolerance_ms = kDefaultCompletionToleranceMs;
};

struct AppendOutcome {
  std::int64_t accepted = 0;
  bool duplicate = false;
  std::size_t sample_count = 0;
};

/// Experiment management and session ingestion on top of a Store.
///
/// Writes to one experiment (subjects, session lifecycle) are serialized by
/// a per-experiment mutex; sample appends by a per-session mutex. Reads go
/// straight to the store's immutable snapshots.
class ExperimentService {
 public:
  explicit ExperimentService(std::shared_ptr<Store> store, ServiceOptions options = {})
      : store_(std::move(store)), options_(options) {}

  Store& store() { return *store_; }
  const Store& store() const { return *store_; }
  const ServiceOptions& options() const { return options_; }

  Experiment create_experiment(Experiment draft) {
    draft.id.clear();
    draft.created_at = now_utc();
    validate_experiment(draft);
    draft.id = store_->save(draft);
    return draft;
  }

  Experiment experiment(const ExperimentId& id) const { return load_experiment_or_unknown(id); }

  std::vector<Experiment> experiments() const {
    std::vector<Experiment> out;
    for (const auto& id : store_->list_experiments()) out.push_back(store_->load_experiment(id));
    return out;
  }

  std::vector<Subject> subjects(const ExperimentId& id) const {
    std::vector<Subject> out;
    for (const auto& sid : store_->list_subjects(id)) out.push_back(store_->load_subject(sid));
    return out;
  }

  std::vector<std::shared_ptr<const SessionRecord>> sessions(const ExperimentId& id) const {
    std::vector<std::shared_ptr<const SessionRecord>> out;
    for (const auto& sid : store_->list_sessions(id)) out.push_back(store_->load_session(sid));
    return out;
  }

  /// Stores the video bytes under their hash and attaches them to the
  /// experiment. The duration comes from the caller or the MP4 header.
  VideoMeta attach_video(const ExperimentId& id, const std::string& bytes, std::string file_name,
                         std::optional<std::int64_t> duration_ms = {}) {
    std::scoped_lock lock(experiment_mutex(id));
    Experiment e = load_experiment_or_unknown(id);
    if (!store_->list_sessions(id).empty()) {
      fail(ErrorCode::ReferentialIntegrity, "video cannot change once sessions exist");
    }
    if (!duration_ms) duration_ms = mp4_duration_ms(bytes);
    if (!duration_ms) fail(ErrorCode::InvalidVideo, "video duration unknown; pass duration_ms");
    VideoMeta video{file_name.empty() ? e.video.file_name : std::move(file_name), *duration_ms, sha256_hex(bytes)};
    validate_video(video);
    store_->save_media(video.content_hash, bytes);
    e.video = video;
    store_->save(e);
    return video;
  }

  Subject add_subject(const ExperimentId& id, std::string display_name) {
    std::scoped_lock lock(experiment_mutex(id));
    load_experiment_or_unknown(id);
    Subject s{"", id, std::move(display_name)};
    s.id = store_->save(s);
    return s;
  }

  SessionRecord begin_session(const ExperimentId& experiment_id, const SubjectId& subject_id) {
    std::scoped_lock lock(experiment_mutex(experiment_id));
    load_experiment_or_unknown(experiment_id);
    Subject subject;
    try {
      subject = store_->load_subject(subject_id);
    } catch (const Error&) {
      fail(ErrorCode::UnknownSubject, "subject " + subject_id + " does not exist");
    }
    if (subject.experiment_id != experiment_id) {
      fail(ErrorCode::UnknownSubject, "subject " + subject_id + " is not part of experiment " + experiment_id);
    }
    for (const auto& s : sessions(experiment_id)) {
      if (s->subject_id != subject_id) continue;
      if (s->state == SessionState::Open) fail(ErrorCode::SessionAlreadyOpen, "subject already has session " + s->id);
      if (s->state == SessionState::Finalized) {
        fail(ErrorCode::SubjectAlreadyAssessed, "subject already completed session " + s->id);
      }
    }
    SessionRecord record{"", experiment_id, subject_id, SessionState::Open, {}, {}};
    record.id = store_->save(record);
    return record;
  }

  std::shared_ptr<const SessionRecord> session(const SessionId& id) const { return load_session_or_unknown(id); }

  AppendOutcome append_samples(const SessionId& id, std::span<const AssessmentSample> batch,
                               std::optional<std::int64_t> batch_seq = {}) {
    load_session_or_unknown(id);
    std::scoped_lock lock(session_mutex(id));
    const auto session = store_->load_session(id);
    const Experiment e = store_->load_experiment(session->experiment_id);
    auto result = append_batch(*session, batch, e, batch_seq);
    if (!result.duplicate) store_->save(result.record);
    return {result.accepted, result.duplicate, result.record.samples.size()};
  }

  SessionRecord finalize_session(const SessionId& id, std::int64_t last_playback_position_ms) {
    const auto current = load_session_or_unknown(id);
    std::scoped_lock lock(experiment_mutex(current->experiment_id), session_mutex(id));
    const auto session = store_->load_session(id);
    const Experiment e = store_->load_experiment(session->experiment_id);
    auto record = finalize(*session, last_playback_position_ms, e.video.duration_ms, options_.completion_tolerance_ms);
    store_->save(record);
    return record;
  }

  SessionRecord abandon_session(const SessionId& id) {
    const auto current = load_session_or_unknown(id);
    std::scoped_lock lock(experiment_mutex(current->experiment_id), session_mutex(id));
    auto record = abandon(*store_->load_session(id));
    store_->save(record);
    return record;
  }

  /// Finalized traces of an experiment.
  std::vector<AssessmentTrace> finalized_traces(const ExperimentId& id) const {
    std::vector<AssessmentTrace> out;
    for (const auto& s : sessions(id)) {
      if (s->state == SessionState::Finalized) out.push_back(s->trace());
    }
    return out;
  }

  SummaryReport summary_report(const ExperimentId& id, std::int64_t grid_step_ms = kDefaultGridMs) const {
    const Experiment e = load_experiment_or_unknown(id);
    return summarize(e, finalized_traces(id), grid_step_ms);
  }

  ExportBundle export_bundle(const ExperimentId& id, bool include_incomplete = false) const {
    load_experiment_or_unknown(id);
    return export_csv(*store_, id, include_incomplete);
  }

  ExperimentId import_bundle(const ExportBundle& bundle) { return import_csv(*store_, bundle); }

 private:
  Experiment load_experiment_or_unknown(const ExperimentId& id) const {
    try {
      return store_->load_experiment(id);
    } catch (const Error& ex) {
      if (ex.code() == ErrorCode::NotFound) fail(ErrorCode::UnknownExperiment, "experiment " + id + " not found");
      throw;
    }
  }

  std::shared_ptr<const SessionRecord> load_session_or_unknown(const SessionId& id) const {
    try {
      return store_->load_session(id);
    } catch (const Error& ex) {
      if (ex.code() == ErrorCode::NotFound) fail(ErrorCode::UnknownSession, "session " + id + " not found");
      throw;
    }
  }

  std::mutex& experiment_mutex(const ExperimentId& id) {
    std::scoped_lock lock(registry_mutex_);
    auto& m = experiment_locks_[id];
    if (!m) m = std::make_unique<std::mutex>();
    return *m;
  }

  std::mutex& session_mutex(const SessionId& id) {
    std::scoped_lock lock(registry_mutex_);
    auto& m = session_locks_[id];
    if (!m) m = std::make_unique<std::mutex>();
    return *m;
  }

  std::shared_ptr<Store> store_;
  ServiceOptions options_;
  std::mutex registry_mutex_;
  std::unordered_map<std::string, std::unique_ptr<std::mutex>> experiment_locks_;
  std::unordered_map<std::string, std::unique_ptr<std::mutex>> session_locks_;
};

}  // namespace vqa
