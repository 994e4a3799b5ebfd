#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <system_error>
#include <vector>

#include "vqa/error.hpp"
#include "vqa/time.hpp"

namespace vqa {

using ExperimentId = std::string;
using SubjectId = std::string;
using SessionId = std::string;

inline constexpr double kGridTolerance = 1e-9;
/// Largest number of fraction digits a scale may need. Keeps every stored
/// value exactly representable as a short decimal.
inline constexpr int kMaxScaleDecimals = 6;
inline constexpr int kMinRadioLevels = 2;
inline constexpr int kMaxRadioLevels = 10;

struct ScaleConfig {
  double min_value = 1.0;
  double max_value = 5.0;
  double step = 0.01;

  bool operator==(const ScaleConfig&) const = default;
};

enum class InputKind { Slider, RadioButtons };

struct InputMethodConfig {
  InputKind kind = InputKind::Slider;
  /// Slider: {low endpoint, high endpoint}. RadioButtons: one per button.
  std::vector<std::string> labels;
  ScaleConfig scale;    // Slider only
  int level_count = 0;  // RadioButtons only

  bool operator==(const InputMethodConfig&) const = default;

  static InputMethodConfig slider(std::string low, std::string high, ScaleConfig scale = {}) {
    return {InputKind::Slider, {std::move(low), std::move(high)}, scale, 0};
  }
  static InputMethodConfig radio(std::vector<std::string> labels) {
    const int n = static_cast<int>(labels.size());
    return {InputKind::RadioButtons, std::move(labels), ScaleConfig{}, n};
  }
};

struct VideoMeta {
  std::string file_name;
  std::int64_t duration_ms = 0;
  std::string content_hash;  // lowercase hex SHA-256, empty until uploaded

  bool operator==(const VideoMeta&) const = default;
};

struct Experiment {
  ExperimentId id;
  std::string name;
  VideoMeta video;
  InputMethodConfig input_method;
  UtcTime created_at{};

  bool operator==(const Experiment&) const = default;
};

struct Subject {
  SubjectId id;
  ExperimentId experiment_id;
  std::string display_name;

  bool operator==(const Subject&) const = default;
};

struct AssessmentSample {
  std::int64_t video_time_ms = 0;
  double value = 0.0;
  UtcTime wall_clock_utc{};

  bool operator==(const AssessmentSample&) const = default;
};

struct AssessmentTrace {
  SessionId session_id;
  SubjectId subject_id;
  std::vector<AssessmentSample> samples;
  bool finalized = false;

  bool operator==(const AssessmentTrace&) const = default;
};

inline std::string_view to_string(InputKind kind) {
  return kind == InputKind::Slider ? "slider" : "radio";
}

// ---------------------------------------------------------------------------
// Decimal helpers

namespace detail {

inline bool is_integral(double x) {
  return std::abs(x - std::round(x)) <= kGridTolerance * std::max(1.0, std::abs(x));
}

}  // namespace detail

/// Number of fraction digits needed to write `x` exactly, or -1 when more
/// than kMaxScaleDecimals would be required.
inline int decimal_places(double x) {
  double scaled = x;
  for (int d = 0; d <= kMaxScaleDecimals; ++d) {
    if (detail::is_integral(scaled)) return d;
    scaled *= 10.0;
  }
  return -1;
}

/// Fixed-point rendering with exactly `decimals` fraction digits.
inline std::string format_fixed(double value, int decimals) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed, decimals);
  if (ec != std::errc{}) fail(ErrorCode::ValueOutOfRange, "value not printable");
  std::string out(buf, end);
  if (out == "-0" || out.rfind("-0.", 0) == 0) {
    // A negative zero must not survive into CSV: strip the sign if all digits are zero.
    if (out.find_first_not_of("-0.") == std::string::npos) out.erase(0, 1);
  }
  return out;
}

/// Shortest representation that parses back to the same double.
inline std::string format_shortest(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) fail(ErrorCode::ValueOutOfRange, "value not printable");
  return std::string(buf, end);
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

inline bool parse_int(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

// ---------------------------------------------------------------------------
// Validation

inline void validate_scale(const ScaleConfig& scale) {
  if (!std::isfinite(scale.min_value) || !std::isfinite(scale.max_value) || !std::isfinite(scale.step)) {
    fail(ErrorCode::InvalidScale, "scale bounds must be finite");
  }
  if (!(scale.min_value < scale.max_value)) fail(ErrorCode::InvalidScale, "scale min must be below max");
  if (!(scale.step > 0.0)) fail(ErrorCode::InvalidScale, "scale step must be positive");
  const double steps = (scale.max_value - scale.min_value) / scale.step;
  if (std::abs(steps - std::round(steps)) * scale.step > kGridTolerance) {
    fail(ErrorCode::InvalidScale, "scale range is not a multiple of the step");
  }
  if (decimal_places(scale.step) < 0 || decimal_places(scale.min_value) < 0) {
    fail(ErrorCode::InvalidScale, "scale step and minimum need at most 6 fraction digits");
  }
}

/// Returns `config` unchanged when it satisfies every input-method invariant.
inline const InputMethodConfig& validate_input_method(const InputMethodConfig& config) {
  for (const auto& label : config.labels) {
    if (label.find('|') != std::string::npos) fail(ErrorCode::InvalidLabel, "labels may not contain '|'");
  }
  if (config.kind == InputKind::RadioButtons) {
    if (config.level_count < kMinRadioLevels || config.level_count > kMaxRadioLevels) {
      fail(ErrorCode::LevelCountOutOfRange,
           "radio buttons need 2 to 10 levels, got " + std::to_string(config.level_count));
    }
    if (static_cast<int>(config.labels.size()) != config.level_count) {
      fail(ErrorCode::LabelArityMismatch, "expected one label per radio button");
    }
  } else {
    if (config.labels.size() != 2) fail(ErrorCode::LabelArityMismatch, "slider needs exactly two endpoint labels");
    validate_scale(config.scale);
  }
  return config;
}

inline ScaleConfig effective_scale(const InputMethodConfig& config) {
  if (config.kind == InputKind::RadioButtons) {
    return {1.0, static_cast<double>(config.level_count), 1.0};
  }
  return config.scale;
}

/// Fraction digits used when writing values recorded on `scale`.
inline int value_decimals(const ScaleConfig& scale) {
  return std::max(decimal_places(scale.step), decimal_places(scale.min_value));
}

/// Snaps `value` to the nearest grid point and canonicalises it through its
/// decimal rendering, so the stored double equals what CSV parsing yields.
inline double quantize(double value, const ScaleConfig& scale) {
  const double k = std::round((value - scale.min_value) / scale.step);
  const double snapped = scale.min_value + k * scale.step;
  double canonical = 0.0;
  parse_double(format_fixed(snapped, value_decimals(scale)), canonical);
  return canonical;
}

inline AssessmentSample validate_sample(const AssessmentSample& sample, const InputMethodConfig& config,
                                        std::int64_t duration_ms) {
  if (sample.video_time_ms < 0 || sample.video_time_ms > duration_ms) {
    fail(ErrorCode::TimeOutOfRange, "video time " + std::to_string(sample.video_time_ms) + " ms outside [0, " +
                                        std::to_string(duration_ms) + "]");
  }
  const ScaleConfig scale = effective_scale(config);
  if (!std::isfinite(sample.value) || sample.value < scale.min_value - kGridTolerance ||
      sample.value > scale.max_value + kGridTolerance) {
    fail(ErrorCode::ValueOutOfRange, "value " + format_shortest(sample.value) + " outside scale");
  }
  const double k = std::round((sample.value - scale.min_value) / scale.step);
  if (std::abs(sample.value - (scale.min_value + k * scale.step)) > kGridTolerance) {
    fail(ErrorCode::ValueOffGrid, "value " + format_shortest(sample.value) + " is not on the scale grid");
  }
  AssessmentSample out = sample;
  out.value = quantize(sample.value, scale);
  return out;
}

inline void validate_video(const VideoMeta& video) {
  if (video.duration_ms <= 0) fail(ErrorCode::InvalidVideo, "video duration must be positive");
}

inline void validate_experiment(const Experiment& experiment) {
  if (experiment.name.empty()) fail(ErrorCode::InvalidExperiment, "experiment name must not be empty");
  validate_video(experiment.video);
  validate_input_method(experiment.input_method);
}

/// Structural trace invariants: origin sample, strictly increasing times,
/// everything inside the video.
inline void validate_trace_shape(const std::vector<AssessmentSample>& samples, std::int64_t duration_ms) {
  if (samples.empty()) fail(ErrorCode::EmptyTrace, "trace has no samples");
  if (samples.front().video_time_ms != 0) fail(ErrorCode::MissingOriginSample, "trace does not start at t=0");
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].video_time_ms <= samples[i - 1].video_time_ms) {
      fail(ErrorCode::NonMonotonicTime, "trace times must be strictly increasing");
    }
  }
  if (samples.back().video_time_ms > duration_ms) fail(ErrorCode::TimeOutOfRange, "sample past end of video");
}

}  // namespace vqa
