#include "alertsynth/stream_tracker.hpp"

#include <algorithm>

namespace alertsynth {

Direction classify_direction(const Alert& alert, const HomeNet& homenet) {
  const bool src_in = homenet.contains(alert.src_ip);
  const bool dst_in = homenet.contains(alert.dst_ip);
  if (src_in && dst_in) return Direction::internal;
  if (src_in) return Direction::outbound;
  // External to internal, and external to external anchored on the source.
  return Direction::inbound;
}

StreamTracker::StreamTracker(const HomeNet& homenet, Duration pivot_horizon)
    : homenet_(&homenet), pivot_horizon_(pivot_horizon) {}

StreamAssignment StreamTracker::assign(const Alert& alert) {
  return assign(alert, classify_direction(alert, *homenet_));
}

StreamState& StreamTracker::create(std::string key, std::optional<IpAddress> anchor, const Alert& alert) {
  const StreamId id = next_id_++;
  StreamState& s = streams_[id];
  s.id = id;
  s.key = std::move(key);
  s.anchor = anchor;
  s.last_ts = alert.ts;
  if (anchor) by_anchor_[*anchor] = id;
  return s;
}

void StreamTracker::touch(const IpAddress& host, StreamId stream, Timestamp ts) {
  auto [it, inserted] = last_touch_.try_emplace(host, Touch{stream, ts});
  if (!inserted && ts >= it->second.ts) it->second = Touch{stream, ts};
}

StreamAssignment StreamTracker::assign(const Alert& alert, Direction direction) {
  StreamState* state = nullptr;
  Transition transition = Transition::stream_start;

  if (direction == Direction::internal) {
    if (auto it = last_touch_.find(alert.src_ip); it != last_touch_.end()) {
      const Touch& t = it->second;
      auto s = streams_.find(t.stream);
      if (s != streams_.end() && alert.ts - t.ts <= pivot_horizon_) {
        state = &s->second;
        transition = Transition::internal_pivot;
        ++pivots_;
      }
    }
    if (!state) {
      state = &create("internal:" + alert.src_ip.to_string() + "#" + std::to_string(next_id_), std::nullopt, alert);
    }
  } else {
    const IpAddress& anchor = direction == Direction::outbound ? alert.dst_ip : alert.src_ip;
    if (auto it = by_anchor_.find(anchor); it != by_anchor_.end()) {
      state = &streams_.at(it->second);
      const bool same_src = alert.src_ip == state->last_src;
      const bool same_dst = alert.dst_ip == state->last_dst;
      if (same_src && same_dst) {
        transition = Transition::same_src_same_dst;
      } else if (same_src) {
        transition = Transition::same_src_new_dst;
      } else if (same_dst) {
        transition = Transition::new_src_same_dst;
      } else if (alert.src_ip == state->last_dst) {
        transition = Transition::src_is_last_dst;
      } else if (alert.dst_ip == state->last_src) {
        transition = Transition::dst_is_last_src;
      } else {
        // No endpoint in common with the previous alert: describe the move
        // relative to the anchor, which is the source of inbound alerts and
        // the destination of outbound ones.
        transition = direction == Direction::inbound ? Transition::same_src_new_dst : Transition::new_src_same_dst;
      }
    } else {
      state = &create(anchor.to_string(), anchor, alert);
    }
  }

  StreamAssignment out;
  out.stream_id = state->id;
  out.maneuver = Maneuver{direction, transition};
  if (state->alerts > 0) out.elapsed = std::max(alert.ts - state->last_ts, Duration::zero());
  state->last_ts = std::max(state->last_ts, alert.ts);
  state->last_src = alert.src_ip;
  state->last_dst = alert.dst_ip;
  ++state->alerts;

  if (homenet_->contains(alert.src_ip)) touch(alert.src_ip, state->id, alert.ts);
  if (homenet_->contains(alert.dst_ip)) touch(alert.dst_ip, state->id, alert.ts);
  return out;
}

std::vector<StreamId> StreamTracker::gc(Timestamp now, Duration idle_timeout) {
  std::vector<StreamId> evicted;
  for (const auto& [id, s] : streams_) {
    if (now - s.last_ts > idle_timeout) evicted.push_back(id);
  }
  std::sort(evicted.begin(), evicted.end());
  for (StreamId id : evicted) {
    auto it = streams_.find(id);
    if (it->second.anchor) by_anchor_.erase(*it->second.anchor);
    streams_.erase(it);
  }
  std::erase_if(last_touch_, [&](const auto& entry) {
    return now - entry.second.ts > pivot_horizon_ || !streams_.contains(entry.second.stream);
  });
  return evicted;
}

const StreamState* StreamTracker::find(StreamId id) const {
  auto it = streams_.find(id);
  return it == streams_.end() ? nullptr : &it->second;
}

}  // namespace alertsynth
