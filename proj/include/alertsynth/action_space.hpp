#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "alertsynth/common.hpp"
#include "alertsynth/ingest.hpp"
#include "alertsynth/ip.hpp"

namespace alertsynth {

// The four action components: how (attack intent stage), what (service),
// where (maneuver) and when (elapsed time bin).
enum class Component : std::uint8_t { ais = 0, service = 1, maneuver = 2, timebin = 3 };
inline constexpr std::size_t kComponents = 4;
inline constexpr std::array<Component, kComponents> kAllComponents = {Component::ais, Component::service,
                                                                      Component::maneuver, Component::timebin};
std::string_view component_name(Component c);

template <typename T>
using PerComponent = std::array<T, kComponents>;

inline constexpr std::array<std::string_view, 12> kDefaultAisCategories = {
    "Benign",         "Discovery",         "VulnerabilityDiscovery", "BruteForce",
    "PrivilegeEscalation", "ArbitraryCodeExecution", "Persistence", "DefenseEvasion",
    "Collection",     "DataExfiltration",  "CommandAndControl",      "Disruption"};

inline constexpr std::string_view kDefaultAis = "Discovery";
inline constexpr std::string_view kServiceEphemeral = "ephemeral";
inline constexpr std::string_view kServiceReserved = "reserved";
inline constexpr std::string_view kServiceOther = "other";

// Ordered set of labels; a label's position is its cell index in a pmf.
class Vocabulary {
 public:
  std::uint32_t add(std::string_view name);
  std::optional<std::uint32_t> find(std::string_view name) const;
  const std::string& name(std::uint32_t index) const { return names_.at(index); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

enum class Direction : std::uint8_t { inbound = 0, outbound = 1, internal = 2 };

enum class Transition : std::uint8_t {
  stream_start = 0,
  same_src_same_dst,
  same_src_new_dst,
  new_src_same_dst,
  src_is_last_dst,
  dst_is_last_src,
  internal_pivot,
};

inline constexpr std::size_t kTransitions = 7;
inline constexpr std::size_t kManeuvers = 3 * kTransitions;

std::string_view direction_name(Direction d);
std::string_view transition_name(Transition t);

struct Maneuver {
  Direction direction = Direction::inbound;
  Transition transition = Transition::stream_start;

  std::uint32_t index() const {
    return static_cast<std::uint32_t>(direction) * kTransitions + static_cast<std::uint32_t>(transition);
  }
  static Maneuver from_index(std::uint32_t index);
  std::string name() const;  // "inbound/same_src_new_dst"

  bool operator==(const Maneuver&) const = default;
};

// Log-spaced elapsed-time bins, closed on the left.
enum class TimeBin : std::uint8_t {
  stream_start = 0,
  under_1ms,
  ms1_to_100ms,
  ms100_to_1s,
  s1_to_10s,
  s10_to_60s,
  s60_to_600s,
  s600_to_1h,
  h1_to_6h,
  over_6h,
};
inline constexpr std::size_t kTimeBins = 10;
std::string_view timebin_name(TimeBin b);

// nullopt is the stream-start marker.
TimeBin bin_elapsed(std::optional<Duration> elapsed);
TimeBin bin_elapsed_seconds(std::optional<double> seconds);

using StreamId = std::uint64_t;

struct Action {
  std::uint32_t ais = 0;
  std::uint32_t service = 0;
  Maneuver maneuver;
  TimeBin timebin = TimeBin::stream_start;
  Timestamp ts;
  StreamId stream_id = 0;
  std::uint64_t raw_seq = 0;

  std::uint32_t value(Component c) const;
};

class WeightConfig {
 public:
  WeightConfig() : WeightConfig(0.3, 0.3, 0.3, 0.1) {}
  // Renormalizes to unit sum; negative or all-zero weights are a ConfigError.
  WeightConfig(double ais, double service, double maneuver, double timebin);

  double operator[](Component c) const { return w_[static_cast<std::size_t>(c)]; }
  const PerComponent<double>& values() const { return w_; }

 private:
  PerComponent<double> w_{};
};

struct KeywordRule {
  std::string keyword;  // lower-case substring
  std::uint32_t ais = 0;
};

struct MappingTables {
  Vocabulary ais;
  Vocabulary services;
  std::unordered_map<std::int64_t, std::uint32_t> signature_ais;
  std::vector<KeywordRule> keyword_rules;
  std::unordered_map<std::uint32_t, std::uint32_t> port_services;  // key = port << 8 | proto
  HomeNet homenet;
  std::uint32_t default_ais = 0;
  std::uint32_t ephemeral = 0;
  std::uint32_t reserved = 0;
  std::uint32_t other = 0;

  PerComponent<std::size_t> sizes() const { return {ais.size(), services.size(), kManeuvers, kTimeBins}; }
  // Display label of a cell in the given component.
  std::string label(Component c, std::uint32_t value) const;
};

// ais_map: "signature_id,ais" rows, then an optional "[keywords]" section of
// "keyword,ais" rules. port_table: "port,proto,label" with proto tcp|udp|any.
// homenet: one CIDR per line. '#' starts a comment in all three.
MappingTables load_mappings(std::istream& ais_map, std::istream& port_table, std::istream& homenet,
                            std::span<const std::string> ais_categories = {});
MappingTables load_mappings(const std::filesystem::path& ais_map, const std::filesystem::path& port_table,
                            const std::filesystem::path& homenet, std::span<const std::string> ais_categories = {});

std::uint32_t map_ais(const Alert& alert, const MappingTables& tables);
std::uint32_t map_service(std::optional<std::uint16_t> port, Proto proto, const MappingTables& tables);

}  // namespace alertsynth
