#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "alertsynth/action_space.hpp"
#include "alertsynth/config.hpp"
#include "alertsynth/ingest.hpp"
#include "alertsynth/ip.hpp"
#include "alertsynth/pipeline.hpp"

namespace alertsynth {

inline constexpr std::string_view kNoiseLabel = "noise";

// A scripted behavior. Inbound alerts run from `sources` to `targets` on one
// of `ports`; outbound alerts run from a target's port out to a source;
// internal alerts run between targets.
struct BehaviorSpec {
  std::string label;
  Direction direction = Direction::inbound;
  std::vector<IpAddress> sources;
  std::vector<IpAddress> targets;
  std::vector<std::uint16_t> ports;
  std::vector<std::int64_t> signatures;
  Proto proto = Proto::tcp;
  std::size_t count = 1;  // alerts per episode
  // Inter-alert gaps are log-normal: ln(gap seconds) ~ N(gap_mu, gap_sigma).
  double gap_mu = 1.6;
  double gap_sigma = 1.0;
  Duration start{};  // offset of the first episode from the scenario start
  // An episode longer than this is compressed to fit.
  Duration duration = std::chrono::hours(1);
  std::optional<Duration> period;  // repeat until the scenario ends
  Duration jitter{};               // uniform +-jitter on each repeat

  void validate() const;  // throws ConfigError
};

// Background reconnaissance: a Poisson stream of alerts from random external
// sources against random hosts in `targets`.
struct NoiseSpec {
  double rate_per_hour = 0;
  Cidr targets = *Cidr::parse("10.0.0.0/16");
  std::vector<std::uint16_t> ports{80, 443, 21, 23, 25, 8080};
  std::vector<std::int64_t> signatures{2100001, 2100002, 2100003, 2100004};
  // Number of distinct sources to draw from; 0 draws a fresh one every time.
  std::size_t source_pool = 0;
};

struct ScenarioSpec {
  std::uint64_t seed = 1;
  Timestamp start = from_epoch_micros(1'595'548'800'000'000);  // 2020-07-24T00:00:00Z
  Duration duration = std::chrono::hours(6);
  HomeNet homenet;  // defaults to 10.0.0.0/8 when empty
  NoiseSpec noise;
  std::vector<BehaviorSpec> behaviors;

  void validate() const;  // throws ConfigError
};

// Flat key=value form: seed, start, duration, homenet, noise.<field>,
// behavior.<label>.<field>.
ScenarioSpec make_scenario(const ConfigMap& values);
ScenarioSpec load_scenario(const std::filesystem::path& path);

struct Scenario {
  std::vector<Alert> alerts;        // time-sorted; raw_seq is the index
  std::vector<std::string> labels;  // parallel to alerts
};

// Deterministic for a given spec, on every platform.
Scenario generate_scenario(const ScenarioSpec& spec);

std::string alert_json(const Alert& alert);
void write_alerts(std::ostream& out, const Scenario& scenario);
void write_truth(std::ostream& out, const Scenario& scenario);

class ScoringError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Truth = std::map<std::uint64_t, std::string>;

Truth read_truth(std::istream& in);
std::vector<Assignment> read_assignments(std::istream& in);
Truth truth_of(const Scenario& scenario);

struct RecoveryScore {
  // Sum over models of the model's largest single-label count, over all
  // labelled alerts. 1.0 when there are no labelled alerts.
  double purity = 1.0;
  std::size_t model_count = 0;  // distinct models holding any assigned alert
  std::map<std::string, ModelId> majority;
  std::map<std::string, std::size_t> label_sizes;
};

// Noise alerts need not be assigned. A labelled alert with no assignment, or
// an assignment for an unknown raw_seq, is a ScoringError.
RecoveryScore score_recovery(const Truth& truth, std::span<const Assignment> assignments);

}  // namespace alertsynth
