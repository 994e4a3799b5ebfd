#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vqa/domain.hpp"

namespace vqa {

enum class SessionState { Open, Finalized, Abandoned };

inline std::string_view to_string(SessionState s) {
  switch (s) {
    case SessionState::Open: return "open";
    case SessionState::Finalized: return "finalized";
    case SessionState::Abandoned: return "abandoned";
  }
  return "open";
}

inline std::optional<SessionState> parse_session_state(std::string_view s) {
  if (s == "open") return SessionState::Open;
  if (s == "finalized") return SessionState::Finalized;
  if (s == "abandoned") return SessionState::Abandoned;
  return std::nullopt;
}

/// One subject's viewing-and-rating run. Records are values: every
/// transition below returns a new record and leaves its input untouched.
struct SessionRecord {
  SessionId id;
  ExperimentId experiment_id;
  SubjectId subject_id;
  SessionState state = SessionState::Open;
  std::vector<AssessmentSample> samples;
  /// batch_seq -> samples accepted, for idempotent retries.
  std::map<std::int64_t, std::int64_t> applied_batches;

  bool operator==(const SessionRecord&) const = default;

  AssessmentTrace trace() const { return {id, subject_id, samples, state == SessionState::Finalized}; }
};

inline constexpr std::int64_t kDefaultCompletionToleranceMs = 500;

struct AppendResult {
  SessionRecord record;
  std::int64_t accepted = 0;
  bool duplicate = false;
};

inline void require_open(const SessionRecord& session) {
  if (session.state != SessionState::Open) {
    fail(ErrorCode::SessionNotOpen, "session " + session.id + " is " + std::string(to_string(session.state)));
  }
}

/// All-or-nothing append. Every sample must validate against the input method
/// and be strictly later than everything stored before it. A replayed
/// `batch_seq` returns the original count and changes nothing.
inline AppendResult append_batch(const SessionRecord& session, std::span<const AssessmentSample> batch,
                                 const Experiment& experiment, std::optional<std::int64_t> batch_seq = {}) {
  require_open(session);
  if (batch_seq) {
    if (auto it = session.applied_batches.find(*batch_seq); it != session.applied_batches.end()) {
      return {session, it->second, true};
    }
  }
  std::vector<AssessmentSample> accepted;
  accepted.reserve(batch.size());
  std::int64_t last = session.samples.empty() ? -1 : session.samples.back().video_time_ms;
  for (const auto& sample : batch) {
    if (sample.video_time_ms <= last) {
      fail(ErrorCode::NonMonotonicTime, "video time " + std::to_string(sample.video_time_ms) +
                                            " ms does not advance past " + std::to_string(last) + " ms");
    }
    accepted.push_back(validate_sample(sample, experiment.input_method, experiment.video.duration_ms));
    last = sample.video_time_ms;
  }
  AppendResult result{session, static_cast<std::int64_t>(accepted.size()), false};
  result.record.samples.insert(result.record.samples.end(), accepted.begin(), accepted.end());
  if (batch_seq) result.record.applied_batches[*batch_seq] = result.accepted;
  return result;
}

inline SessionRecord finalize(const SessionRecord& session, std::int64_t last_playback_position_ms,
                              std::int64_t duration_ms,
                              std::int64_t tolerance_ms = kDefaultCompletionToleranceMs) {
  require_open(session);
  if (session.samples.empty()) fail(ErrorCode::EmptyTrace, "cannot finalize a session without samples");
  if (session.samples.front().video_time_ms != 0) {
    fail(ErrorCode::MissingOriginSample, "trace has no sample at t=0");
  }
  if (last_playback_position_ms < duration_ms - tolerance_ms) {
    fail(ErrorCode::IncompleteViewing, "playback stopped at " + std::to_string(last_playback_position_ms) +
                                           " ms of " + std::to_string(duration_ms) + " ms");
  }
  SessionRecord out = session;
  out.state = SessionState::Finalized;
  return out;
}

inline SessionRecord abandon(const SessionRecord& session) {
  require_open(session);
  SessionRecord out = session;
  out.state = SessionState::Abandoned;
  return out;
}

}  // namespace vqa
