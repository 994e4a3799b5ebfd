#pragma once

#include <chrono>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace vqa {

using UtcTime = std::chrono::sys_time<std::chrono::milliseconds>;

inline UtcTime now_utc() {
  return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

/// RFC 3339 UTC with millisecond precision, e.g. 2019-04-01T09:30:00.250Z.
inline std::string format_utc(UtcTime t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss hms{t - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()), static_cast<int>(hms.subseconds().count()));
  return buf;
}

/// Accepts `YYYY-MM-DDTHH:MM:SS[.fff]Z`. Fractions longer than milliseconds
/// are rejected rather than truncated so that parse/format round trips.
inline std::optional<UtcTime> parse_utc(std::string_view s) {
  using namespace std::chrono;
  int y = 0;
  unsigned mo = 0, d = 0;
  int h = 0, mi = 0, sec = 0;
  if (s.size() < 20 || s.back() != 'Z') return std::nullopt;
  const std::string head(s.substr(0, 19));
  char tail = 0;
  if (std::sscanf(head.c_str(), "%4d-%2u-%2uT%2d:%2d:%2d%c", &y, &mo, &d, &h, &mi, &sec, &tail) != 6) {
    return std::nullopt;
  }
  if (head[4] != '-' || head[7] != '-' || head[10] != 'T' || head[13] != ':' || head[16] != ':') return std::nullopt;
  int millis = 0;
  const auto frac = s.substr(19, s.size() - 20);
  if (!frac.empty()) {
    if (frac.front() != '.' || frac.size() < 2 || frac.size() > 4) return std::nullopt;
    int scale = 100;
    for (char c : frac.substr(1)) {
      if (c < '0' || c > '9') return std::nullopt;
      millis += (c - '0') * scale;
      scale /= 10;
    }
  }
  const year_month_day ymd{year{y}, month{mo}, day{d}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 59 || h < 0 || mi < 0 || sec < 0) return std::nullopt;
  return UtcTime{sys_days{ymd}.time_since_epoch() + hours{h} + minutes{mi} + seconds{sec} + milliseconds{millis}};
}

}  // namespace vqa
