#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "alertsynth/action_space.hpp"
#include "alertsynth/common.hpp"
#include "alertsynth/ingest.hpp"
#include "alertsynth/ip.hpp"

namespace alertsynth {

Direction classify_direction(const Alert& alert, const HomeNet& homenet);

struct StreamState {
  StreamId id = 0;
  // Anchoring external address, or "internal:<origin>#<n>" for chains that
  // started inside the home network.
  std::string key;
  std::optional<IpAddress> anchor;
  Timestamp last_ts;
  IpAddress last_src;
  IpAddress last_dst;
  std::size_t alerts = 0;
};

struct StreamAssignment {
  StreamId stream_id = 0;
  Maneuver maneuver;
  std::optional<Duration> elapsed;  // nullopt on the first alert of a stream
};

// Groups alerts into streams: alerts from an external source, alerts feeding
// back to it, and internal alerts that continue from a host the stream touched
// within the pivot horizon.
class StreamTracker {
 public:
  explicit StreamTracker(const HomeNet& homenet, Duration pivot_horizon = std::chrono::hours(1));

  StreamAssignment assign(const Alert& alert);
  StreamAssignment assign(const Alert& alert, Direction direction);

  // Removes streams idle for longer than idle_timeout, oldest id first.
  std::vector<StreamId> gc(Timestamp now, Duration idle_timeout);

  const StreamState* find(StreamId id) const;
  std::size_t size() const { return streams_.size(); }
  // Counts internal_pivot assignments; each one had a qualifying touched host.
  std::size_t pivots() const { return pivots_; }

 private:
  struct Touch {
    StreamId stream;
    Timestamp ts;
  };

  StreamState& create(std::string key, std::optional<IpAddress> anchor, const Alert& alert);
  void touch(const IpAddress& host, StreamId stream, Timestamp ts);

  const HomeNet* homenet_;
  Duration pivot_horizon_;
  StreamId next_id_ = 1;
  std::size_t pivots_ = 0;
  std::unordered_map<StreamId, StreamState> streams_;
  std::unordered_map<IpAddress, StreamId> by_anchor_;
  // Most recent touch of each internal host. The most recent toucher is the
  // stream an internal alert from that host joins.
  std::unordered_map<IpAddress, Touch> last_touch_;
};

}  // namespace alertsynth
