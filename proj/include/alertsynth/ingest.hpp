#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "alertsynth/common.hpp"
#include "alertsynth/ip.hpp"

namespace alertsynth {

enum class Proto : std::uint8_t { tcp, udp, icmp, other };

std::string_view proto_name(Proto p);
Proto parse_proto(std::string_view text);

struct Alert {
  Timestamp ts;
  IpAddress src_ip;
  IpAddress dst_ip;
  std::optional<std::uint16_t> src_port;
  std::optional<std::uint16_t> dst_port;
  Proto proto = Proto::other;
  std::int64_t signature_id = 0;
  std::string signature_text;
  std::string sensor;
  std::uint64_t raw_seq = 0;
};

enum class ParseErrorKind { malformed, missing_field };

struct ParseError {
  ParseErrorKind kind;
  // Line excerpt for malformed input, field name for missing fields.
  std::string detail;
};

using ParseResult = std::variant<Alert, ParseError>;

// Maps a canonical EVE key ("timestamp", "src_ip", "dest_ip", "src_port",
// "dest_port", "proto", "alert.signature_id", "alert.signature", "host") to
// the dotted key path another exporter uses.
using KeyAliases = std::map<std::string, std::string, std::less<>>;

ParseResult parse_alert_line(std::string_view line, std::uint64_t seq, const KeyAliases& aliases = {});

struct SourceSpec {
  enum class Kind { file_replay, stdin_stream, tcp_listen };

  Kind kind = Kind::file_replay;
  std::string location;  // path, or host:port for tcp_listen
  double speedup = 0.0;   // replay rate multiplier, 0 = as fast as possible

  // "file:<path>", "<path>", "stdin", "-", "tcp:<host>:<port>"
  static SourceSpec parse(std::string_view text, double speedup = 0.0);
};

class SourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Line-oriented transport underneath an alert source.
class LineSource {
 public:
  enum class Status { line, idle, end, error };

  virtual ~LineSource() = default;
  virtual Status next(std::string& line) = 0;
};

class StreamLineSource final : public LineSource {
 public:
  explicit StreamLineSource(std::istream& in) : in_(&in) {}
  explicit StreamLineSource(std::unique_ptr<std::istream> owned);
  ~StreamLineSource() override;

  Status next(std::string& line) override;

 private:
  std::unique_ptr<std::istream> owned_;
  std::istream* in_;
};

// Listens on host:port and serves one connection at a time. Returns idle when
// nothing arrives within the poll interval, end once stop is requested.
class TcpLineSource final : public LineSource {
 public:
  TcpLineSource(const std::string& host, std::uint16_t port, const std::atomic<bool>* stop_flag = nullptr);
  ~TcpLineSource() override;
  TcpLineSource(const TcpLineSource&) = delete;
  TcpLineSource& operator=(const TcpLineSource&) = delete;

  Status next(std::string& line) override;
  std::uint16_t bound_port() const { return port_; }
  void request_stop() { local_stop_ = true; }

 private:
  bool stopping() const;

  int listen_fd_ = -1;
  int conn_fd_ = -1;
  std::uint16_t port_ = 0;
  std::string buffer_;
  std::atomic<bool> local_stop_{false};
  const std::atomic<bool>* stop_flag_;
};

std::unique_ptr<LineSource> open_line_source(const SourceSpec& spec, const std::atomic<bool>* stop_flag = nullptr);

struct IngestCounters {
  std::uint64_t lines = 0;
  std::uint64_t emitted = 0;
  std::uint64_t malformed = 0;
  std::uint64_t missing_field = 0;
  std::uint64_t out_of_order = 0;

  std::uint64_t rejected() const { return malformed + missing_field; }
};

// Parses lines into Alerts, counts rejects, and paces file replay.
class AlertReader {
 public:
  enum class Status { alert, idle, end, error };
  using Sleeper = std::function<void(Duration)>;

  AlertReader(std::unique_ptr<LineSource> lines, KeyAliases aliases = {}, double speedup = 0.0,
              Sleeper sleeper = {});

  Status next(Alert& out);
  const IngestCounters& counters() const { return counters_; }
  const ParseError* last_error() const { return last_error_ ? &*last_error_ : nullptr; }

 private:
  std::unique_ptr<LineSource> lines_;
  KeyAliases aliases_;
  double speedup_;
  Sleeper sleeper_;
  IngestCounters counters_;
  std::optional<Timestamp> last_ts_;
  std::optional<Timestamp> max_ts_;
  std::optional<ParseError> last_error_;
  std::string line_;
};

// Opens the configured source. Unreachable sources throw SourceError.
AlertReader open_source(const SourceSpec& spec, KeyAliases aliases = {}, const std::atomic<bool>* stop_flag = nullptr);

}  // namespace alertsynth
