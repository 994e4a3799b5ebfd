#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "vqa/transport.hpp"

namespace vqa {

/// Synthetic subject population for exercising ingestion and aggregation at
/// lab-protocol scale without people.
struct SimProfile {
  int subject_count = 30;
  std::int64_t heartbeat_ms = 100;
  std::int64_t reaction_lag_ms = 300;
  double noise_sd = 0.1;
  std::uint64_t seed = 1;
  /// Subjects whose sessions are driven in parallel.
  int concurrency = 4;
  /// Video time covered by one ingestion batch.
  std::int64_t batch_span_ms = 1000;
  /// Wall clock of subject 0 at video time 0; later subjects follow back to back.
  UtcTime start_utc = *parse_utc("2019-06-03T09:00:00.000Z");
};

inline void validate_profile(const SimProfile& p) {
  if (p.subject_count < 1) fail(ErrorCode::InvalidProfile, "subject_count must be at least 1");
  if (p.heartbeat_ms < 10) fail(ErrorCode::InvalidProfile, "heartbeat_ms must be at least 10");
  if (p.reaction_lag_ms < 0) fail(ErrorCode::InvalidProfile, "reaction_lag_ms must not be negative");
  if (!(p.noise_sd >= 0.0)) fail(ErrorCode::InvalidProfile, "noise_sd must not be negative");
  if (p.concurrency < 1) fail(ErrorCode::InvalidProfile, "concurrency must be at least 1");
  if (p.batch_span_ms < 1) fail(ErrorCode::InvalidProfile, "batch_span_ms must be positive");
}

/// A subject's latent opinion: a step function over video time.
struct LatentOpinion {
  std::vector<std::int64_t> change_times;  // ascending, first is 0
  std::vector<double> levels;

  double at(std::int64_t t) const {
    auto it = std::upper_bound(change_times.begin(), change_times.end(), t);
    return levels[static_cast<std::size_t>(std::distance(change_times.begin(), it)) - 1];
  }
};

/// Deterministic capture trace of one synthetic subject: samples at t=0, at
/// every heartbeat, and where a (lagged) opinion change lands between beats.
inline std::vector<AssessmentSample> synthesize_trace(const SimProfile& profile, int subject_index,
                                                      const InputMethodConfig& input, std::int64_t duration_ms) {
  std::seed_seq seq{static_cast<std::uint32_t>(profile.seed), static_cast<std::uint32_t>(profile.seed >> 32),
                    static_cast<std::uint32_t>(subject_index)};
  std::mt19937_64 rng(seq);
  const ScaleConfig scale = effective_scale(input);

  LatentOpinion opinion;
  std::uniform_real_distribution<double> level(scale.min_value, scale.max_value);
  std::uniform_int_distribution<std::int64_t> when(1, std::max<std::int64_t>(1, duration_ms - 1));
  const int changes = std::uniform_int_distribution<int>(0, 5)(rng);
  opinion.change_times.push_back(0);
  for (int i = 0; i < changes; ++i) opinion.change_times.push_back(when(rng));
  std::sort(opinion.change_times.begin(), opinion.change_times.end());
  opinion.change_times.erase(std::unique(opinion.change_times.begin(), opinion.change_times.end()),
                             opinion.change_times.end());
  for (std::size_t i = 0; i < opinion.change_times.size(); ++i) opinion.levels.push_back(level(rng));

  std::vector<std::int64_t> times;
  for (std::int64_t t = 0; t <= duration_ms; t += profile.heartbeat_ms) times.push_back(t);
  for (std::size_t i = 1; i < opinion.change_times.size(); ++i) {
    const auto t = opinion.change_times[i] + profile.reaction_lag_ms;
    if (t <= duration_ms) times.push_back(t);
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  std::normal_distribution<double> noise(0.0, profile.noise_sd);
  const auto subject_start =
      profile.start_utc + std::chrono::milliseconds((duration_ms + 60'000) * static_cast<std::int64_t>(subject_index));
  std::vector<AssessmentSample> samples;
  samples.reserve(times.size());
  for (auto t : times) {
    double v = opinion.at(std::max<std::int64_t>(0, t - profile.reaction_lag_ms));
    if (profile.noise_sd > 0.0) v += noise(rng);
    v = quantize(std::clamp(v, scale.min_value, scale.max_value), scale);
    samples.push_back({t, v, subject_start + std::chrono::milliseconds(t)});
  }
  return samples;
}

struct SimulationResult {
  std::vector<SubjectId> subjects;
  std::vector<SessionId> sessions;
  json report;  // /results body
};

/// Drives begin -> batched appends -> finalize for every synthetic subject
/// through `transport`, then fetches the experiment results. Subjects and
/// sessions are created in order so ids are reproducible for a given store.
inline SimulationResult run_simulation(Transport& transport, const ExperimentId& experiment_id,
                                       const SimProfile& profile) {
  validate_profile(profile);
  const Experiment experiment = experiment_from_json(transport.call("GET", "/api/experiments/" + experiment_id));
  validate_experiment(experiment);
  const auto duration = experiment.video.duration_ms;

  SimulationResult out;
  for (int i = 0; i < profile.subject_count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "sim-%03d", i + 1);
    const auto subject =
        transport.call("POST", "/api/experiments/" + experiment_id + "/subjects", {{"display_name", name}});
    out.subjects.push_back(subject.at("id").get<std::string>());
    const auto session =
        transport.call("POST", "/api/sessions", {{"experiment_id", experiment_id}, {"subject_id", out.subjects.back()}});
    out.sessions.push_back(session.at("id").get<std::string>());
  }

  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (int i = next++; i < profile.subject_count; i = next++) {
      try {
        const auto samples = synthesize_trace(profile, i, experiment.input_method, duration);
        const std::string base = "/api/sessions/" + out.sessions[static_cast<std::size_t>(i)];
        std::int64_t batch_seq = 0;
        std::size_t begin = 0;
        while (begin < samples.size()) {
          const auto window_end = (samples[begin].video_time_ms / profile.batch_span_ms + 1) * profile.batch_span_ms;
          std::size_t end = begin;
          json batch = json::array();
          while (end < samples.size() && samples[end].video_time_ms < window_end) batch.push_back(to_json(samples[end++]));
          transport.call("POST", base + "/samples", {{"batch_seq", ++batch_seq}, {"samples", batch}});
          begin = end;
        }
        transport.call("POST", base + "/finalize", {{"last_playback_position_ms", duration}});
      } catch (...) {
        std::scoped_lock lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  const int workers = std::min(profile.concurrency, profile.subject_count);
  for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);

  out.report = transport.call("GET", "/api/experiments/" + experiment_id + "/results");
  return out;
}

}  // namespace vqa
