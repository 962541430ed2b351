#include "alertsynth/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <set>
#include <tuple>
#include <unordered_map>

#include <json.hpp>

namespace alertsynth {

namespace {

// Distribution transforms are written out by hand: the standard library
// leaves them implementation-defined, which would break cross-platform
// determinism.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
  double exponential(double mean) { return -mean * std::log1p(-uniform()); }
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[index(v.size())];
  }
  std::uint16_t ephemeral_port() { return static_cast<std::uint16_t>(49152 + index(16384)); }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return splitmix(seed ^ splitmix(h));
}

std::uint32_t v4_value(const IpAddress& a) {
  const auto& b = a.bytes();
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

IpAddress random_host(Rng& rng, const Cidr& cidr) {
  require(cidr.network.is_v4(), "random_host: IPv4 only");
  const std::uint32_t mask = cidr.prefix == 0 ? 0 : ~std::uint32_t{0} << (32 - cidr.prefix);
  for (;;) {
    const auto host = static_cast<std::uint32_t>(rng.bits()) & ~mask;
    // Skip the network and broadcast addresses when there is room to.
    if (cidr.prefix < 31 && (host == 0 || host == ~mask)) continue;
    return IpAddress::v4((v4_value(cidr.network) & mask) | host);
  }
}

IpAddress random_external(Rng& rng, const HomeNet& homenet) {
  for (;;) {
    const auto v = static_cast<std::uint32_t>(rng.bits());
    const auto top = v >> 24;
    if (top == 0 || top == 10 || top == 127 || top >= 224) continue;
    const auto addr = IpAddress::v4(v);
    if (!homenet.contains(addr)) return addr;
  }
}

template <typename T>
std::vector<T> parse_list(std::string_view key, std::string_view text, auto&& one) {
  std::vector<T> out;
  for (auto part : split(text, ',')) {
    part = trim(part);
    if (part.empty()) continue;
    auto v = one(part);
    if (!v) throw ConfigError(std::string(key) + ": bad entry '" + std::string(part) + "'");
    out.push_back(*v);
  }
  return out;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<std::uint16_t> parse_port(std::string_view s) {
  auto v = parse_int(s);
  if (!v || *v < 0 || *v > 65535) return std::nullopt;
  return static_cast<std::uint16_t>(*v);
}

std::vector<IpAddress> parse_ips(std::string_view key, std::string_view text) {
  return parse_list<IpAddress>(key, text, [](std::string_view s) { return IpAddress::parse(s); });
}

double real(std::string_view key, std::string_view text) {
  const std::string s(trim(text));
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw ConfigError(std::string(key) + ": expected a number");
  }
  return v;
}

Duration span(std::string_view key, std::string_view text) {
  auto d = parse_duration(text);
  if (!d) throw ConfigError(std::string(key) + ": expected a duration");
  return *d;
}

std::uint64_t unsigned_value(std::string_view key, std::string_view text) {
  auto v = parse_int(trim(text));
  if (!v || *v < 0) throw ConfigError(std::string(key) + ": expected a nonnegative integer");
  return static_cast<std::uint64_t>(*v);
}

void set_behavior_field(BehaviorSpec& b, std::string_view field, std::string_view key, std::string_view value) {
  if (field == "direction") {
    const auto d = to_lower(trim(value));
    if (d == "inbound") {
      b.direction = Direction::inbound;
    } else if (d == "outbound") {
      b.direction = Direction::outbound;
    } else if (d == "internal") {
      b.direction = Direction::internal;
    } else {
      throw ConfigError(std::string(key) + ": expected inbound, outbound or internal");
    }
  } else if (field == "sources") {
    b.sources = parse_ips(key, value);
  } else if (field == "targets") {
    b.targets = parse_ips(key, value);
  } else if (field == "ports") {
    b.ports = parse_list<std::uint16_t>(key, value, parse_port);
  } else if (field == "signatures") {
    b.signatures = parse_list<std::int64_t>(key, value, parse_int);
  } else if (field == "proto") {
    b.proto = parse_proto(trim(value));
  } else if (field == "count") {
    b.count = unsigned_value(key, value);
  } else if (field == "gap_mu") {
    b.gap_mu = real(key, value);
  } else if (field == "gap_median") {
    b.gap_mu = std::log(to_seconds(span(key, value)));
  } else if (field == "gap_sigma") {
    b.gap_sigma = real(key, value);
  } else if (field == "start") {
    b.start = span(key, value);
  } else if (field == "duration") {
    b.duration = span(key, value);
  } else if (field == "period") {
    b.period = span(key, value);
  } else if (field == "jitter") {
    b.jitter = span(key, value);
  } else {
    throw ConfigError("unknown scenario key '" + std::string(key) + "'");
  }
}

struct Draft {
  Alert alert;
  std::size_t label;
};

}  // namespace

void BehaviorSpec::validate() const {
  const std::string who = "behavior '" + label + "': ";
  if (label.empty() || label == kNoiseLabel) throw ConfigError("behavior label must be set and not 'noise'");
  if (count < 1) throw ConfigError(who + "count must be at least 1");
  if (!(gap_sigma > 0) || !std::isfinite(gap_mu)) throw ConfigError(who + "gap parameters must be positive");
  if (targets.empty()) throw ConfigError(who + "needs targets");
  if (direction != Direction::internal && sources.empty()) throw ConfigError(who + "needs sources");
  if (ports.empty()) throw ConfigError(who + "needs ports");
  if (signatures.empty()) throw ConfigError(who + "needs signatures");
  if (duration <= Duration::zero()) throw ConfigError(who + "duration must be positive");
  if (period && *period <= Duration::zero()) throw ConfigError(who + "period must be positive");
  if (jitter < Duration::zero()) throw ConfigError(who + "jitter must not be negative");
}

void ScenarioSpec::validate() const {
  if (duration <= Duration::zero()) throw ConfigError("scenario duration must be positive");
  if (noise.rate_per_hour < 0) throw ConfigError("noise rate must not be negative");
  if (noise.rate_per_hour > 0 && (noise.ports.empty() || noise.signatures.empty())) {
    throw ConfigError("noise needs ports and signatures");
  }
  if (!noise.targets.network.is_v4()) throw ConfigError("noise targets must be an IPv4 range");
  std::set<std::string> labels;
  for (const auto& b : behaviors) {
    b.validate();
    if (!labels.insert(b.label).second) throw ConfigError("duplicate behavior '" + b.label + "'");
  }
}

ScenarioSpec make_scenario(const ConfigMap& values) {
  ScenarioSpec spec;
  std::map<std::string, BehaviorSpec> behaviors;
  for (const auto& [key, value] : values) {
    if (key == "seed") {
      spec.seed = unsigned_value(key, value);
    } else if (key == "start") {
      auto t = parse_iso8601(value);
      if (!t) throw ConfigError("start: expected an ISO-8601 timestamp");
      spec.start = *t;
    } else if (key == "duration") {
      spec.duration = span(key, value);
    } else if (key == "homenet") {
      spec.homenet = HomeNet(parse_list<Cidr>(key, value, [](std::string_view s) { return Cidr::parse(s); }));
    } else if (key == "noise.rate") {
      spec.noise.rate_per_hour = real(key, value);
    } else if (key == "noise.targets") {
      auto c = Cidr::parse(trim(value));
      if (!c) throw ConfigError("noise.targets: expected a CIDR");
      spec.noise.targets = *c;
    } else if (key == "noise.ports") {
      spec.noise.ports = parse_list<std::uint16_t>(key, value, parse_port);
    } else if (key == "noise.signatures") {
      spec.noise.signatures = parse_list<std::int64_t>(key, value, parse_int);
    } else if (key == "noise.sources") {
      spec.noise.source_pool = unsigned_value(key, value);
    } else if (key.starts_with("behavior.")) {
      const std::string_view rest = std::string_view(key).substr(9);
      const auto dot = rest.rfind('.');
      if (dot == std::string_view::npos || dot == 0) throw ConfigError("bad behavior key '" + key + "'");
      const std::string label(rest.substr(0, dot));
      auto& b = behaviors[label];
      b.label = label;
      set_behavior_field(b, rest.substr(dot + 1), key, value);
    } else {
      throw ConfigError("unknown scenario key '" + key + "'");
    }
  }
  for (auto& [label, b] : behaviors) spec.behaviors.push_back(std::move(b));
  spec.validate();
  return spec;
}

ScenarioSpec load_scenario(const std::filesystem::path& path) { return make_scenario(read_config_file(path)); }

Scenario generate_scenario(const ScenarioSpec& spec) {
  spec.validate();
  const HomeNet homenet = spec.homenet.ranges().empty() ? HomeNet({*Cidr::parse("10.0.0.0/8")}) : spec.homenet;
  const Timestamp end = spec.start + spec.duration;

  std::vector<std::string> label_names{std::string(kNoiseLabel)};
  std::vector<Draft> drafts;

  if (spec.noise.rate_per_hour > 0) {
    Rng rng(derive_seed(spec.seed, kNoiseLabel));
    std::vector<IpAddress> pool;
    for (std::size_t i = 0; i < spec.noise.source_pool; ++i) pool.push_back(random_external(rng, homenet));
    const double mean_gap = 3600.0 / spec.noise.rate_per_hour;
    for (Timestamp t = spec.start + from_seconds(rng.exponential(mean_gap)); t < end;
         t += from_seconds(rng.exponential(mean_gap))) {
      Alert a;
      a.ts = t;
      a.src_ip = pool.empty() ? random_external(rng, homenet) : rng.pick(pool);
      a.dst_ip = random_host(rng, spec.noise.targets);
      a.src_port = rng.ephemeral_port();
      a.dst_port = rng.pick(spec.noise.ports);
      a.proto = Proto::tcp;
      a.signature_id = rng.pick(spec.noise.signatures);
      drafts.push_back({std::move(a), 0});
    }
  }

  for (const auto& b : spec.behaviors) {
    Rng rng(derive_seed(spec.seed, b.label));
    const std::size_t label = label_names.size();
    label_names.push_back(b.label);

    std::vector<Timestamp> episodes;
    const Timestamp first = spec.start + b.start;
    if (b.period) {
      for (Timestamp t = first; t < end; t += *b.period) {
        const double j = b.jitter > Duration::zero() ? (2 * rng.uniform() - 1) * to_seconds(b.jitter) : 0.0;
        episodes.push_back(std::max(spec.start, t + from_seconds(j)));
      }
    } else {
      episodes.push_back(first);
    }

    for (Timestamp ep : episodes) {
      std::vector<double> offsets{0.0};
      for (std::size_t i = 1; i < b.count; ++i) {
        offsets.push_back(offsets.back() + std::exp(b.gap_mu + b.gap_sigma * rng.normal()));
      }
      const double limit = to_seconds(b.duration);
      if (offsets.back() > limit) {
        const double scale = limit / offsets.back();
        for (double& o : offsets) o *= scale;
      }
      for (double o : offsets) {
        Alert a;
        a.ts = ep + from_seconds(o);
        a.proto = b.proto;
        a.signature_id = rng.pick(b.signatures);
        const std::uint16_t port = rng.pick(b.ports);
        if (b.direction == Direction::inbound) {
          a.src_ip = rng.pick(b.sources);
          a.dst_ip = rng.pick(b.targets);
          a.src_port = rng.ephemeral_port();
          a.dst_port = port;
        } else if (b.direction == Direction::outbound) {
          a.src_ip = rng.pick(b.targets);
          a.dst_ip = rng.pick(b.sources);
          a.src_port = port;
          a.dst_port = rng.ephemeral_port();
        } else {
          a.src_ip = rng.pick(b.targets);
          a.dst_ip = rng.pick(b.targets);
          a.src_port = rng.ephemeral_port();
          a.dst_port = port;
        }
        drafts.push_back({std::move(a), label});
      }
    }
  }

  auto by_time = [](const Draft& x, const Draft& y) { return x.alert.ts < y.alert.ts; };
  std::stable_sort(drafts.begin(), drafts.end(), by_time);
  std::set<std::tuple<Timestamp, IpAddress, IpAddress, std::int64_t>> seen;
  bool bumped = false;
  for (auto& d : drafts) {
    auto& a = d.alert;
    while (!seen.emplace(a.ts, a.src_ip, a.dst_ip, a.signature_id).second) {
      a.ts += Duration(1);
      bumped = true;
    }
  }
  if (bumped) std::stable_sort(drafts.begin(), drafts.end(), by_time);

  Scenario out;
  out.alerts.reserve(drafts.size());
  out.labels.reserve(drafts.size());
  for (auto& d : drafts) {
    d.alert.raw_seq = out.alerts.size();
    d.alert.signature_text = "SYNTH signature " + std::to_string(d.alert.signature_id);
    out.alerts.push_back(std::move(d.alert));
    out.labels.push_back(label_names[d.label]);
  }
  return out;
}

std::string alert_json(const Alert& a) {
  nlohmann::ordered_json j;
  j["timestamp"] = format_iso8601(a.ts);
  j["src_ip"] = a.src_ip.to_string();
  if (a.src_port) j["src_port"] = *a.src_port;
  j["dest_ip"] = a.dst_ip.to_string();
  if (a.dst_port) j["dest_port"] = *a.dst_port;
  std::string proto(proto_name(a.proto));
  for (char& c : proto) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  j["proto"] = proto;
  j["alert"] = {{"signature_id", a.signature_id}, {"signature", a.signature_text}};
  return j.dump();
}

void write_alerts(std::ostream& out, const Scenario& scenario) {
  for (const auto& a : scenario.alerts) out << alert_json(a) << '\n';
}

void write_truth(std::ostream& out, const Scenario& scenario) {
  out << "raw_seq,label\n";
  for (std::size_t i = 0; i < scenario.alerts.size(); ++i) {
    out << scenario.alerts[i].raw_seq << ',' << scenario.labels[i] << '\n';
  }
}

Truth truth_of(const Scenario& scenario) {
  Truth t;
  for (std::size_t i = 0; i < scenario.alerts.size(); ++i) t.emplace(scenario.alerts[i].raw_seq, scenario.labels[i]);
  return t;
}

namespace {

template <typename Row>
void read_rows(std::istream& in, const char* what, Row&& row) {
  std::string line;
  bool header = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (header) {
      header = false;
      if (!std::isdigit(static_cast<unsigned char>(trim(line).front()))) continue;
    }
    const auto parts = split(line, ',');
    if (parts.size() != 2) throw ScoringError(std::string(what) + " line " + std::to_string(lineno) + ": expected 2 fields");
    row(trim(parts[0]), trim(parts[1]), lineno);
  }
}

std::uint64_t seq_of(std::string_view s, const char* what, std::size_t lineno) {
  auto v = parse_int(s);
  if (!v || *v < 0) throw ScoringError(std::string(what) + " line " + std::to_string(lineno) + ": bad raw_seq");
  return static_cast<std::uint64_t>(*v);
}

}  // namespace

Truth read_truth(std::istream& in) {
  Truth t;
  read_rows(in, "truth", [&](std::string_view seq, std::string_view label, std::size_t lineno) {
    t[seq_of(seq, "truth", lineno)] = std::string(label);
  });
  return t;
}

std::vector<Assignment> read_assignments(std::istream& in) {
  std::vector<Assignment> out;
  read_rows(in, "assignments", [&](std::string_view seq, std::string_view model, std::size_t lineno) {
    out.push_back({seq_of(seq, "assignments", lineno), seq_of(model, "assignments", lineno)});
  });
  return out;
}

RecoveryScore score_recovery(const Truth& truth, std::span<const Assignment> assignments) {
  RecoveryScore score;
  std::map<std::string, std::map<ModelId, std::size_t>> overlap;
  std::set<ModelId> models;
  std::set<std::uint64_t> assigned;
  for (const auto& a : assignments) {
    auto it = truth.find(a.raw_seq);
    if (it == truth.end()) throw ScoringError("assignment for unknown raw_seq " + std::to_string(a.raw_seq));
    if (!assigned.insert(a.raw_seq).second) {
      throw ScoringError("raw_seq " + std::to_string(a.raw_seq) + " assigned twice");
    }
    models.insert(a.model);
    if (it->second != kNoiseLabel) ++overlap[it->second][a.model];
  }
  for (const auto& [seq, label] : truth) {
    if (label == kNoiseLabel) continue;
    if (!assigned.contains(seq)) throw ScoringError("labelled raw_seq " + std::to_string(seq) + " has no assignment");
    ++score.label_sizes[label];
  }
  score.model_count = models.size();

  std::size_t total = 0;
  std::map<ModelId, std::map<std::string, std::size_t>> by_model;
  for (const auto& [label, size] : score.label_sizes) {
    total += size;
    for (const auto& [model, n] : overlap[label]) by_model[model][label] = n;
    ModelId best = 0;
    std::size_t best_n = 0;
    for (const auto& [model, n] : overlap[label]) {
      if (n > best_n) {
        best = model;
        best_n = n;
      }
    }
    score.majority[label] = best;
  }
  std::size_t best_sum = 0;
  for (const auto& [model, labels] : by_model) {
    std::size_t top = 0;
    for (const auto& [label, n] : labels) top = std::max(top, n);
    best_sum += top;
  }
  if (total > 0) score.purity = static_cast<double>(best_sum) / static_cast<double>(total);
  return score;
}

}  // namespace alertsynth
