#include "alertsynth/action_space.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>

namespace alertsynth {

std::string_view component_name(Component c) {
  switch (c) {
    case Component::ais:
      return "ais";
    case Component::service:
      return "service";
    case Component::maneuver:
      return "maneuver";
    case Component::timebin:
      return "timebin";
  }
  return "?";
}

std::uint32_t Vocabulary::add(std::string_view name) {
  std::string key(name);
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  const auto idx = static_cast<std::uint32_t>(names_.size());
  names_.push_back(key);
  index_.emplace(std::move(key), idx);
  return idx;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view name) const {
  if (auto it = index_.find(std::string(name)); it != index_.end()) return it->second;
  return std::nullopt;
}

std::string_view direction_name(Direction d) {
  switch (d) {
    case Direction::inbound:
      return "inbound";
    case Direction::outbound:
      return "outbound";
    case Direction::internal:
      return "internal";
  }
  return "?";
}

std::string_view transition_name(Transition t) {
  static constexpr std::array<std::string_view, kTransitions> names = {
      "stream_start",   "same_src_same_dst", "same_src_new_dst", "new_src_same_dst",
      "src_is_last_dst", "dst_is_last_src",  "internal_pivot"};
  return names.at(static_cast<std::size_t>(t));
}

Maneuver Maneuver::from_index(std::uint32_t index) {
  require(index < kManeuvers, "maneuver index out of range");
  return Maneuver{static_cast<Direction>(index / kTransitions), static_cast<Transition>(index % kTransitions)};
}

std::string Maneuver::name() const {
  return std::string(direction_name(direction)) + "/" + std::string(transition_name(transition));
}

std::string_view timebin_name(TimeBin b) {
  static constexpr std::array<std::string_view, kTimeBins> names = {
      "stream_start", "[0,1ms)",   "[1ms,100ms)", "[100ms,1s)", "[1s,10s)",
      "[10s,60s)",    "[60s,600s)", "[600s,1h)",  "[1h,6h)",    ">=6h"};
  return names.at(static_cast<std::size_t>(b));
}

TimeBin bin_elapsed(std::optional<Duration> elapsed) {
  if (!elapsed) return TimeBin::stream_start;
  using namespace std::chrono;
  // Integer microsecond edges keep the boundaries exact.
  static constexpr std::array<std::int64_t, 8> edges = {
      1'000, 100'000, 1'000'000, 10'000'000, 60'000'000, 600'000'000, 3'600'000'000LL, 21'600'000'000LL};
  const auto us = std::max<std::int64_t>(elapsed->count(), 0);
  std::size_t i = 0;
  while (i < edges.size() && us >= edges[i]) ++i;
  return static_cast<TimeBin>(1 + i);
}

TimeBin bin_elapsed_seconds(std::optional<double> seconds) {
  if (!seconds) return TimeBin::stream_start;
  static constexpr std::array<double, 8> edges = {1e-3, 0.1, 1.0, 10.0, 60.0, 600.0, 3600.0, 21600.0};
  const double s = std::max(*seconds, 0.0);
  std::size_t i = 0;
  while (i < edges.size() && s >= edges[i]) ++i;
  return static_cast<TimeBin>(1 + i);
}

std::uint32_t Action::value(Component c) const {
  switch (c) {
    case Component::ais:
      return ais;
    case Component::service:
      return service;
    case Component::maneuver:
      return maneuver.index();
    case Component::timebin:
      return static_cast<std::uint32_t>(timebin);
  }
  return 0;
}

WeightConfig::WeightConfig(double ais, double service, double maneuver, double timebin) {
  w_ = {ais, service, maneuver, timebin};
  double sum = 0;
  for (double w : w_) {
    if (!(w >= 0) || !std::isfinite(w)) throw ConfigError("component weights must be finite and >= 0");
    sum += w;
  }
  if (sum <= 0) throw ConfigError("component weights must not all be zero");
  for (double& w : w_) w /= sum;
}

std::string MappingTables::label(Component c, std::uint32_t value) const {
  switch (c) {
    case Component::ais:
      return ais.name(value);
    case Component::service:
      return services.name(value);
    case Component::maneuver:
      return Maneuver::from_index(value).name();
    case Component::timebin:
      return std::string(timebin_name(static_cast<TimeBin>(value)));
  }
  return {};
}

namespace {

std::uint32_t port_key(std::uint16_t port, Proto proto) {
  return static_cast<std::uint32_t>(port) << 8 | static_cast<std::uint32_t>(proto);
}

// Yields (line number, fields) for each non-blank, non-comment line.
template <typename Fn>
void for_each_row(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = line;
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    auto fields = split(view, ',');
    for (auto& f : fields) f = trim(f);
    fn(lineno, view, fields);
  }
}

std::string where(std::string_view file, std::size_t lineno) {
  return std::string(file) + ":" + std::to_string(lineno) + ": ";
}

}  // namespace

MappingTables load_mappings(std::istream& ais_map, std::istream& port_table, std::istream& homenet,
                            std::span<const std::string> ais_categories) {
  MappingTables t;
  if (ais_categories.empty()) {
    for (auto name : kDefaultAisCategories) t.ais.add(name);
  } else {
    for (const auto& name : ais_categories) t.ais.add(trim(name));
  }
  const auto default_ais = t.ais.find(kDefaultAis);
  t.default_ais = default_ais.value_or(0);

  auto resolve_ais = [&](std::string_view name, std::size_t lineno) {
    auto idx = t.ais.find(name);
    if (!idx) throw ConfigError(where("ais_map", lineno) + "unknown AIS category '" + std::string(name) + "'");
    return *idx;
  };

  bool keyword_section = false;
  for_each_row(ais_map, [&](std::size_t lineno, std::string_view raw, const std::vector<std::string_view>& f) {
    if (raw == "[keywords]") {
      keyword_section = true;
      return;
    }
    if (raw == "[signatures]") {
      keyword_section = false;
      return;
    }
    if (f.size() != 2) throw ConfigError(where("ais_map", lineno) + "expected two fields");
    if (f[0] == "signature_id" || f[0] == "keyword") return;  // header row
    if (keyword_section) {
      if (f[0].empty()) throw ConfigError(where("ais_map", lineno) + "empty keyword");
      t.keyword_rules.push_back({to_lower(f[0]), resolve_ais(f[1], lineno)});
      return;
    }
    std::int64_t sid = 0;
    const auto [ptr, ec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), sid);
    if (ec != std::errc{} || ptr != f[0].data() + f[0].size()) {
      throw ConfigError(where("ais_map", lineno) + "bad signature id '" + std::string(f[0]) + "'");
    }
    if (!t.signature_ais.emplace(sid, resolve_ais(f[1], lineno)).second) {
      throw ConfigError(where("ais_map", lineno) + "duplicate signature id " + std::to_string(sid));
    }
  });

  for_each_row(port_table, [&](std::size_t lineno, std::string_view, const std::vector<std::string_view>& f) {
    if (f.size() != 3) throw ConfigError(where("port_table", lineno) + "expected port,proto,label");
    if (f[0] == "port") return;
    unsigned port = 0;
    const auto [ptr, ec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), port);
    if (ec != std::errc{} || ptr != f[0].data() + f[0].size() || port > 65535) {
      throw ConfigError(where("port_table", lineno) + "bad port '" + std::string(f[0]) + "'");
    }
    if (f[2].empty()) throw ConfigError(where("port_table", lineno) + "empty label");
    const auto label = t.services.add(f[2]);
    const auto proto_text = to_lower(f[1]);
    std::vector<Proto> protos;
    if (proto_text == "any" || proto_text == "*") {
      protos = {Proto::tcp, Proto::udp};
    } else if (proto_text == "tcp" || proto_text == "udp") {
      protos = {parse_proto(proto_text)};
    } else {
      throw ConfigError(where("port_table", lineno) + "proto must be tcp, udp or any");
    }
    for (Proto p : protos) {
      auto [it, inserted] = t.port_services.emplace(port_key(static_cast<std::uint16_t>(port), p), label);
      if (!inserted && it->second != label) {
        throw ConfigError(where("port_table", lineno) + "conflicting label for " + std::to_string(port) + "/" +
                          std::string(proto_name(p)));
      }
    }
  });
  t.ephemeral = t.services.add(kServiceEphemeral);
  t.reserved = t.services.add(kServiceReserved);
  t.other = t.services.add(kServiceOther);

  std::vector<Cidr> ranges;
  for_each_row(homenet, [&](std::size_t lineno, std::string_view raw, const std::vector<std::string_view>&) {
    auto cidr = Cidr::parse(raw);
    if (!cidr) throw ConfigError(where("homenet", lineno) + "bad CIDR '" + std::string(raw) + "'");
    ranges.push_back(*cidr);
  });
  t.homenet = HomeNet(std::move(ranges));
  return t;
}

MappingTables load_mappings(const std::filesystem::path& ais_map, const std::filesystem::path& port_table,
                            const std::filesystem::path& homenet, std::span<const std::string> ais_categories) {
  auto open = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot read " + p.string());
    return in;
  };
  auto a = open(ais_map);
  auto p = open(port_table);
  auto h = open(homenet);
  return load_mappings(a, p, h, ais_categories);
}

std::uint32_t map_ais(const Alert& alert, const MappingTables& tables) {
  if (auto it = tables.signature_ais.find(alert.signature_id); it != tables.signature_ais.end()) {
    return it->second;
  }
  if (!tables.keyword_rules.empty() && !alert.signature_text.empty()) {
    const auto text = to_lower(alert.signature_text);
    for (const auto& rule : tables.keyword_rules) {
      if (text.find(rule.keyword) != std::string::npos) return rule.ais;
    }
  }
  return tables.default_ais;
}

std::uint32_t map_service(std::optional<std::uint16_t> port, Proto proto, const MappingTables& tables) {
  if (!port) return tables.reserved;
  if (auto it = tables.port_services.find(port_key(*port, proto)); it != tables.port_services.end()) {
    return it->second;
  }
  if (*port >= 49152) return tables.ephemeral;
  if (*port == 0) return tables.reserved;
  return tables.other;
}

}  // namespace alertsynth
