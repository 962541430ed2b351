#pragma once

#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "alertsynth/action_space.hpp"
#include "alertsynth/common.hpp"

namespace fixtures {

inline std::filesystem::path data_dir() { return ALERTSYNTH_DATA_DIR; }

inline alertsynth::MappingTables default_tables() {
  return alertsynth::load_mappings(data_dir() / "ais_map.csv", data_dir() / "ports.csv", data_dir() / "homenet.txt");
}

inline alertsynth::Timestamp at(double seconds) {
  return alertsynth::from_epoch_micros(1'595'548'800'000'000) + alertsynth::from_seconds(seconds);
}

inline alertsynth::Action action(std::uint32_t ais, std::uint32_t service, std::uint32_t maneuver,
                                 std::uint32_t timebin, double t = 0, alertsynth::StreamId stream = 1) {
  alertsynth::Action a;
  a.ais = ais;
  a.service = service;
  a.maneuver = alertsynth::Maneuver::from_index(maneuver);
  a.timebin = static_cast<alertsynth::TimeBin>(timebin);
  a.ts = at(t);
  a.stream_id = stream;
  return a;
}

inline std::vector<alertsynth::Action> actions_at(const std::vector<double>& times, alertsynth::StreamId stream = 1) {
  std::vector<alertsynth::Action> out;
  for (std::size_t i = 0; i < times.size(); ++i) {
    auto a = action(0, 0, 0, 0, times[i], stream);
    a.raw_seq = i;
    out.push_back(a);
  }
  return out;
}

// Per-test scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("alertsynth-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
