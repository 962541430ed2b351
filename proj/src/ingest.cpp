#include "alertsynth/ingest.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <thread>

#include <json.hpp>

namespace alertsynth {

using json = nlohmann::json;

std::string_view proto_name(Proto p) {
  switch (p) {
    case Proto::tcp:
      return "tcp";
    case Proto::udp:
      return "udp";
    case Proto::icmp:
      return "icmp";
    case Proto::other:
      break;
  }
  return "other";
}

Proto parse_proto(std::string_view text) {
  const auto lower = to_lower(trim(text));
  if (lower == "tcp" || lower == "6") return Proto::tcp;
  if (lower == "udp" || lower == "17") return Proto::udp;
  if (lower == "icmp" || lower == "ipv6-icmp" || lower == "icmpv6" || lower == "1" || lower == "58") {
    return Proto::icmp;
  }
  return Proto::other;
}

namespace {

const json* lookup(const json& root, std::string_view canonical, const KeyAliases& aliases) {
  std::string_view path = canonical;
  if (auto it = aliases.find(canonical); it != aliases.end()) path = it->second;
  const json* node = &root;
  for (auto part : split(path, '.')) {
    if (!node->is_object()) return nullptr;
    auto it = node->find(std::string(part));
    if (it == node->end()) return nullptr;
    node = &*it;
  }
  return node->is_null() ? nullptr : node;
}

std::string excerpt(std::string_view line) {
  constexpr std::size_t kMax = 80;
  return std::string(line.substr(0, kMax));
}

std::optional<std::uint16_t> read_port(const json* v) {
  if (!v) return std::nullopt;
  std::int64_t port = -1;
  if (v->is_number_integer()) {
    port = v->get<std::int64_t>();
  } else if (v->is_number_float()) {
    const double d = v->get<double>();
    if (std::floor(d) == d) port = static_cast<std::int64_t>(d);
  } else if (v->is_string()) {
    const auto& s = v->get_ref<const std::string&>();
    std::from_chars(s.data(), s.data() + s.size(), port);
  }
  if (port < 0 || port > 65535) return std::nullopt;
  return static_cast<std::uint16_t>(port);
}

std::optional<Timestamp> read_timestamp(const json& v) {
  if (v.is_string()) return parse_iso8601(v.get_ref<const std::string&>());
  if (v.is_number()) {
    const double secs = v.get<double>();
    if (!std::isfinite(secs)) return std::nullopt;
    return from_epoch_micros(static_cast<std::int64_t>(std::llround(secs * 1e6)));
  }
  return std::nullopt;
}

}  // namespace

ParseResult parse_alert_line(std::string_view line, std::uint64_t seq, const KeyAliases& aliases) {
  json doc = json::parse(line.begin(), line.end(), nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) {
    return ParseError{ParseErrorKind::malformed, excerpt(line)};
  }

  Alert alert;
  alert.raw_seq = seq;

  const json* ts = lookup(doc, "timestamp", aliases);
  if (!ts) return ParseError{ParseErrorKind::missing_field, "timestamp"};
  auto parsed_ts = read_timestamp(*ts);
  if (!parsed_ts) return ParseError{ParseErrorKind::malformed, excerpt(line)};
  alert.ts = *parsed_ts;

  // Host names are not addresses; they count as missing.
  const json* src = lookup(doc, "src_ip", aliases);
  std::optional<IpAddress> src_ip = src && src->is_string() ? IpAddress::parse(src->get_ref<const std::string&>())
                                                            : std::nullopt;
  if (!src_ip) return ParseError{ParseErrorKind::missing_field, "src_ip"};
  alert.src_ip = *src_ip;

  const json* dst = lookup(doc, "dest_ip", aliases);
  std::optional<IpAddress> dst_ip = dst && dst->is_string() ? IpAddress::parse(dst->get_ref<const std::string&>())
                                                            : std::nullopt;
  if (!dst_ip) return ParseError{ParseErrorKind::missing_field, "dest_ip"};
  alert.dst_ip = *dst_ip;

  alert.src_port = read_port(lookup(doc, "src_port", aliases));
  alert.dst_port = read_port(lookup(doc, "dest_port", aliases));

  if (const json* p = lookup(doc, "proto", aliases)) {
    if (p->is_string()) {
      alert.proto = parse_proto(p->get_ref<const std::string&>());
    } else if (p->is_number_integer()) {
      alert.proto = parse_proto(std::to_string(p->get<std::int64_t>()));
    }
  }
  if (const json* sid = lookup(doc, "alert.signature_id", aliases)) {
    if (sid->is_number_integer()) {
      alert.signature_id = sid->get<std::int64_t>();
    } else if (sid->is_string()) {
      const auto& s = sid->get_ref<const std::string&>();
      std::from_chars(s.data(), s.data() + s.size(), alert.signature_id);
    }
  }
  if (const json* sig = lookup(doc, "alert.signature", aliases); sig && sig->is_string()) {
    alert.signature_text = sig->get<std::string>();
  }
  if (const json* host = lookup(doc, "host", aliases); host && host->is_string()) {
    alert.sensor = host->get<std::string>();
  }
  return alert;
}

SourceSpec SourceSpec::parse(std::string_view text, double speedup) {
  SourceSpec spec;
  spec.speedup = speedup;
  text = trim(text);
  if (text == "stdin" || text == "-") {
    spec.kind = Kind::stdin_stream;
  } else if (text.starts_with("tcp:")) {
    spec.kind = Kind::tcp_listen;
    spec.location = std::string(text.substr(4));
  } else if (text.starts_with("tcp://")) {
    spec.kind = Kind::tcp_listen;
    spec.location = std::string(text.substr(6));
  } else if (text.starts_with("file:")) {
    spec.location = std::string(text.substr(5));
  } else {
    spec.location = std::string(text);
  }
  if (spec.speedup < 0 || !std::isfinite(spec.speedup)) throw ConfigError("speedup must be >= 0");
  return spec;
}

StreamLineSource::StreamLineSource(std::unique_ptr<std::istream> owned)
    : owned_(std::move(owned)), in_(owned_.get()) {}

StreamLineSource::~StreamLineSource() = default;

LineSource::Status StreamLineSource::next(std::string& line) {
  if (std::getline(*in_, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return Status::line;
  }
  return in_->bad() ? Status::error : Status::end;
}

TcpLineSource::TcpLineSource(const std::string& host, std::uint16_t port, const std::atomic<bool>* stop_flag)
    : stop_flag_(stop_flag) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE | AI_NUMERICSERV;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &res) != 0 || !res) {
    throw SourceError("cannot resolve listen address " + host);
  }
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 4) == 0) {
      listen_fd_ = fd;
      break;
    }
    ::close(fd);
  }
  freeaddrinfo(res);
  if (listen_fd_ < 0) throw SourceError("cannot listen on " + host + ":" + service + ": " + std::strerror(errno));

  sockaddr_storage bound{};
  socklen_t len = sizeof bound;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = bound.ss_family == AF_INET6 ? ntohs(reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port)
                                      : ntohs(reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
}

TcpLineSource::~TcpLineSource() {
  if (conn_fd_ >= 0) ::close(conn_fd_);
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

bool TcpLineSource::stopping() const {
  return local_stop_.load() || (stop_flag_ && stop_flag_->load());
}

LineSource::Status TcpLineSource::next(std::string& line) {
  constexpr int kPollMillis = 200;
  while (true) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      line.assign(buffer_, 0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return Status::line;
    }
    if (stopping()) return Status::end;

    pollfd pfd{conn_fd_ >= 0 ? conn_fd_ : listen_fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, kPollMillis);
    if (ready < 0) {
      if (errno == EINTR) continue;
      return Status::error;
    }
    if (ready == 0) return Status::idle;

    if (conn_fd_ < 0) {
      conn_fd_ = ::accept(listen_fd_, nullptr, nullptr);
      if (conn_fd_ < 0 && errno != EINTR) return Status::error;
      continue;
    }
    char chunk[8192];
    const auto n = ::read(conn_fd_, chunk, sizeof chunk);
    if (n > 0) {
      buffer_.append(chunk, static_cast<std::size_t>(n));
    } else if (n == 0 || errno != EINTR) {
      // Peer closed: a trailing unterminated record still counts as a line.
      ::close(conn_fd_);
      conn_fd_ = -1;
      if (!buffer_.empty()) {
        line = std::move(buffer_);
        buffer_.clear();
        return Status::line;
      }
      if (n < 0) return Status::error;
    }
  }
}

std::unique_ptr<LineSource> open_line_source(const SourceSpec& spec, const std::atomic<bool>* stop_flag) {
  switch (spec.kind) {
    case SourceSpec::Kind::stdin_stream:
      return std::make_unique<StreamLineSource>(std::cin);
    case SourceSpec::Kind::tcp_listen: {
      const auto colon = spec.location.rfind(':');
      if (colon == std::string::npos) throw SourceError("tcp source needs host:port, got " + spec.location);
      std::string host = spec.location.substr(0, colon);
      if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
      unsigned port = 0;
      const auto digits = std::string_view(spec.location).substr(colon + 1);
      const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
      if (ec != std::errc{} || ptr != digits.data() + digits.size() || port > 65535) {
        throw SourceError("bad tcp port in " + spec.location);
      }
      return std::make_unique<TcpLineSource>(host, static_cast<std::uint16_t>(port), stop_flag);
    }
    case SourceSpec::Kind::file_replay:
      break;
  }
  auto file = std::make_unique<std::ifstream>(spec.location);
  if (!*file) throw SourceError("cannot open alert file " + spec.location);
  return std::make_unique<StreamLineSource>(std::move(file));
}

AlertReader::AlertReader(std::unique_ptr<LineSource> lines, KeyAliases aliases, double speedup, Sleeper sleeper)
    : lines_(std::move(lines)), aliases_(std::move(aliases)), speedup_(speedup), sleeper_(std::move(sleeper)) {
  if (!sleeper_) sleeper_ = [](Duration d) { std::this_thread::sleep_for(d); };
}

AlertReader::Status AlertReader::next(Alert& out) {
  while (true) {
    switch (lines_->next(line_)) {
      case LineSource::Status::end:
        return Status::end;
      case LineSource::Status::idle:
        return Status::idle;
      case LineSource::Status::error:
        return Status::error;
      case LineSource::Status::line:
        break;
    }
    const auto seq = counters_.lines++;
    auto result = parse_alert_line(line_, seq, aliases_);
    if (auto* err = std::get_if<ParseError>(&result)) {
      if (err->kind == ParseErrorKind::malformed) {
        ++counters_.malformed;
      } else {
        ++counters_.missing_field;
      }
      last_error_ = std::move(*err);
      continue;
    }
    out = std::move(std::get<Alert>(result));
    if (max_ts_ && out.ts < *max_ts_) ++counters_.out_of_order;
    if (speedup_ > 0 && last_ts_ && out.ts > *last_ts_) {
      sleeper_(std::chrono::duration_cast<Duration>((out.ts - *last_ts_) / speedup_));
    }
    last_ts_ = out.ts;
    if (!max_ts_ || out.ts > *max_ts_) max_ts_ = out.ts;
    ++counters_.emitted;
    return Status::alert;
  }
}

AlertReader open_source(const SourceSpec& spec, KeyAliases aliases, const std::atomic<bool>* stop_flag) {
  const double speedup = spec.kind == SourceSpec::Kind::file_replay ? spec.speedup : 0.0;
  return AlertReader(open_line_source(spec, stop_flag), std::move(aliases), speedup);
}

}  // namespace alertsynth
