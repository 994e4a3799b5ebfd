#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vqa/domain.hpp"

namespace vqa {

inline constexpr std::int64_t kDefaultGridMs = 100;

struct ResampledSeries {
  std::int64_t grid_step_ms = 0;
  std::vector<double> values;

  bool operator==(const ResampledSeries&) const = default;
};

struct AggregateCurve {
  std::int64_t grid_step_ms = 0;
  std::vector<double> mean;
  std::vector<double> min;
  std::vector<double> max;
  /// Population standard deviation per grid point (CSV export only).
  std::vector<double> stddev;
  int subject_count = 0;

  bool operator==(const AggregateCurve&) const = default;
};

struct MosReport {
  std::map<SubjectId, double> per_subject_overall;
  double mos = 0.0;
  ScaleConfig scale;

  bool operator==(const MosReport&) const = default;
};

inline std::size_t grid_size(std::int64_t grid_step_ms, std::int64_t duration_ms) {
  if (grid_step_ms <= 0) fail(ErrorCode::InvalidGrid, "grid step must be positive");
  if (duration_ms <= 0) fail(ErrorCode::InvalidGrid, "duration must be positive");
  return static_cast<std::size_t>(duration_ms / grid_step_ms) + 1;
}

/// Zero-order-hold reading: the value of the latest sample at or before
/// `t_ms`. The last sample holds until the end of the video.
inline double value_at(const AssessmentTrace& trace, std::int64_t t_ms, std::int64_t duration_ms) {
  if (t_ms < 0 || t_ms > duration_ms) fail(ErrorCode::TimeOutOfRange, "t outside video");
  const auto& s = trace.samples;
  if (s.empty()) fail(ErrorCode::EmptyTrace, "trace has no samples");
  auto it = std::upper_bound(s.begin(), s.end(), t_ms,
                             [](std::int64_t t, const AssessmentSample& a) { return t < a.video_time_ms; });
  if (it == s.begin()) fail(ErrorCode::MissingOriginSample, "no sample at or before t");
  return std::prev(it)->value;
}

inline ResampledSeries resample_zoh(const AssessmentTrace& trace, std::int64_t grid_step_ms,
                                    std::int64_t duration_ms) {
  const std::size_t n = grid_size(grid_step_ms, duration_ms);
  const auto& s = trace.samples;
  if (s.empty()) fail(ErrorCode::EmptyTrace, "trace has no samples");
  if (s.front().video_time_ms != 0) fail(ErrorCode::MissingOriginSample, "trace does not start at t=0");

  ResampledSeries out{grid_step_ms, {}};
  out.values.reserve(n);
  std::size_t cursor = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::int64_t t = static_cast<std::int64_t>(k) * grid_step_ms;
    while (cursor + 1 < s.size() && s[cursor + 1].video_time_ms <= t) ++cursor;
    out.values.push_back(s[cursor].value);
  }
  return out;
}

/// Integral of the held trace over [0, duration] divided by the duration.
///
/// Runs of equal consecutive values are integrated as one interval, so
/// samples that repeat the held value (heartbeats) leave the result
/// bit-identical.
inline double time_weighted_mean(const AssessmentTrace& trace, std::int64_t duration_ms) {
  const auto& s = trace.samples;
  if (s.empty()) fail(ErrorCode::EmptyTrace, "trace has no samples");
  if (s.front().video_time_ms != 0) fail(ErrorCode::MissingOriginSample, "trace does not start at t=0");
  if (duration_ms <= 0) fail(ErrorCode::InvalidGrid, "duration must be positive");
  double area = 0.0;
  for (std::size_t i = 0; i < s.size();) {
    std::size_t j = i + 1;
    while (j < s.size() && s[j].value == s[i].value) ++j;
    const std::int64_t end = j < s.size() ? s[j].video_time_ms : duration_ms;
    area += s[i].value * static_cast<double>(end - s[i].video_time_ms);
    i = j;
  }
  return area / static_cast<double>(duration_ms);
}

/// Arithmetic mean. Values are summed in sorted order so the result is
/// bit-identical for every permutation of the input.
inline double mean_of(std::vector<double> values) {
  if (values.empty()) fail(ErrorCode::NoSubjects, "no values to average");
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

inline double mos(const std::map<SubjectId, double>& overalls) {
  if (overalls.empty()) fail(ErrorCode::NoSubjects, "MOS needs at least one subject");
  std::vector<double> values;
  values.reserve(overalls.size());
  for (const auto& [id, v] : overalls) values.push_back(v);
  return mean_of(std::move(values));
}

inline AggregateCurve aggregate_curve(std::span<const AssessmentTrace> traces, std::int64_t grid_step_ms,
                                      std::int64_t duration_ms) {
  if (traces.empty()) fail(ErrorCode::NoTraces, "no finalized traces");
  const std::size_t n = grid_size(grid_step_ms, duration_ms);

  std::vector<ResampledSeries> series;
  series.reserve(traces.size());
  for (const auto& trace : traces) series.push_back(resample_zoh(trace, grid_step_ms, duration_ms));

  AggregateCurve curve;
  curve.grid_step_ms = grid_step_ms;
  curve.subject_count = static_cast<int>(traces.size());
  curve.mean.resize(n);
  curve.min.resize(n);
  curve.max.resize(n);
  curve.stddev.resize(n);
  const double count = static_cast<double>(series.size());
  for (std::size_t k = 0; k < n; ++k) {
    double sum = 0.0;
    double lo = series.front().values[k];
    double hi = lo;
    for (const auto& s : series) {
      const double v = s.values[k];
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (const auto& s : series) sq += (s.values[k] - mean) * (s.values[k] - mean);
    // Rounding in sum/count can push the mean one ulp outside [lo, hi].
    curve.mean[k] = std::clamp(mean, lo, hi);
    curve.min[k] = lo;
    curve.max[k] = hi;
    curve.stddev[k] = std::sqrt(sq / count);
  }
  return curve;
}

struct SubjectSeries {
  SubjectId subject_id;
  SessionId session_id;
  double overall = 0.0;
  ResampledSeries series;

  bool operator==(const SubjectSeries&) const = default;
};

struct SummaryReport {
  ExperimentId experiment_id;
  MosReport mos;
  AggregateCurve aggregate;
  std::vector<SubjectSeries> subjects;  // sorted by subject id

  bool operator==(const SummaryReport&) const = default;
};

/// Assembles MOS, aggregate curve and per-subject series from the finalized
/// traces of one experiment. Non-finalized traces are ignored.
inline SummaryReport summarize(const Experiment& experiment, std::vector<AssessmentTrace> traces,
                               std::int64_t grid_step_ms = kDefaultGridMs) {
  std::erase_if(traces, [](const AssessmentTrace& t) { return !t.finalized; });
  if (traces.empty()) fail(ErrorCode::NoTraces, "experiment has no finalized sessions");
  std::sort(traces.begin(), traces.end(), [](const auto& a, const auto& b) {
    return a.subject_id != b.subject_id ? a.subject_id < b.subject_id : a.session_id < b.session_id;
  });
  const std::int64_t duration = experiment.video.duration_ms;

  SummaryReport report;
  report.experiment_id = experiment.id;
  report.mos.scale = effective_scale(experiment.input_method);
  for (const auto& trace : traces) {
    SubjectSeries entry{trace.subject_id, trace.session_id, time_weighted_mean(trace, duration),
                        resample_zoh(trace, grid_step_ms, duration)};
    report.mos.per_subject_overall[trace.subject_id] = entry.overall;
    report.subjects.push_back(std::move(entry));
  }
  report.mos.mos = mos(report.mos.per_subject_overall);
  report.aggregate = aggregate_curve(traces, grid_step_ms, duration);
  return report;
}

}  // namespace vqa
