#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "alertsynth/aggregation.hpp"
#include "alertsynth/common.hpp"
#include "alertsynth/ingest.hpp"
#include "alertsynth/synthesis.hpp"

namespace alertsynth {

enum class ClockMode { event_time, wall_time };

struct RunConfig {
  SourceSpec source{SourceSpec::Kind::stdin_stream, "-", 0.0};
  KeyAliases aliases;

  // Empty paths load empty tables.
  std::filesystem::path ais_map;
  std::filesystem::path port_table;
  std::filesystem::path homenet;
  std::vector<std::string> ais_categories;

  SegmenterConfig segmenter;
  SynthConfig synth;
  Duration pivot_horizon = std::chrono::hours(1);
  Duration idle_timeout = std::chrono::hours(12);

  Duration export_interval = std::chrono::hours(1);
  std::filesystem::path export_dir = "exports";
  ClockMode clock_mode = ClockMode::event_time;
  // Also write assignments.csv and merges.csv for offline scoring.
  bool write_assignments = false;

  // Throws ConfigError.
  void validate() const;
};

// Flat key=value pairs; later assignments of a key win.
using ConfigMap = std::map<std::string, std::string, std::less<>>;

// '#' starts a comment; blank lines are skipped. A line without '=' is a
// ConfigError.
ConfigMap parse_config_text(std::istream& in);
ConfigMap read_config_file(const std::filesystem::path& path);

// Unknown keys and unparseable values are ConfigErrors. Relative mapping and
// source paths resolve against base_dir.
RunConfig make_run_config(const ConfigMap& values, const std::filesystem::path& base_dir = {});

WeightConfig parse_weights(std::string_view text);

}  // namespace alertsynth
