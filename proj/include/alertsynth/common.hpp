#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace alertsynth {

using Duration = std::chrono::microseconds;
using Timestamp = std::chrono::sys_time<Duration>;

/// Raised when a caller breaks a documented precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid configuration or mapping files. Always fatal before start-up.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const char* what) {
  if (!ok) [[unlikely]] {
    throw ContractViolation(what);
  }
}

inline double to_seconds(Duration d) {
  return std::chrono::duration<double>(d).count();
}

inline Duration from_seconds(double s) {
  return std::chrono::duration_cast<Duration>(std::chrono::duration<double>(s));
}

inline Timestamp from_epoch_micros(std::int64_t us) { return Timestamp(Duration(us)); }
inline std::int64_t epoch_micros(Timestamp t) { return t.time_since_epoch().count(); }

// Accepts "YYYY-MM-DD[T ]HH:MM:SS[.fraction][Z|+HH:MM|+HHMM|-HH:MM]".
std::optional<Timestamp> parse_iso8601(std::string_view text);
// "2020-07-24T12:00:00.000001Z"
std::string format_iso8601(Timestamp t);
// "20200724T120000Z", used in export file names.
std::string format_iso8601_compact(Timestamp t);

// "6h", "600s", "10m", "1d", "250ms", "1.5h"; a bare number means seconds.
std::optional<Duration> parse_duration(std::string_view text);
std::string format_duration(Duration d);

// Rounds to 9 significant digits so exports print identically everywhere.
double round_significant(double v, int digits = 9);
std::string format_decimal(double v);

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

}  // namespace alertsynth
