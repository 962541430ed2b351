#pragma once

#include <atomic>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "alertsynth/action_space.hpp"
#include "alertsynth/aggregation.hpp"
#include "alertsynth/config.hpp"
#include "alertsynth/export.hpp"
#include "alertsynth/stream_tracker.hpp"
#include "alertsynth/synthesis.hpp"

namespace alertsynth {

struct PipelineHooks {
  std::function<void(Timestamp, const nlohmann::ordered_json&)> models;
  std::function<void(std::span<const EvidenceRow>)> evidence;
};

struct Assignment {
  std::uint64_t raw_seq = 0;
  ModelId model = 0;  // the model that absorbed the aggregate at the time
};

// Wires stream tracking, segmentation and synthesis behind a processing
// clock. Callers supply the clock: the alert timestamp in event-time mode,
// the system clock in wall-time mode. The clock never moves backwards.
class Pipeline {
 public:
  Pipeline(const RunConfig& config, MappingTables tables, PipelineHooks hooks = {});

  // Runs exports and expiries due before `clock`, then handles the alert.
  void process(const Alert& alert, Timestamp clock);
  // The clock moved with no alert.
  void advance(Timestamp clock);
  // Flushes every open aggregate and runs the final export.
  void finish();
  void finish(Timestamp clock);

  Action encode(const Alert& alert, const StreamAssignment& stream, Direction direction) const;

  const ModelSet& models() const { return models_; }
  const MappingTables& tables() const { return tables_; }
  const std::vector<Assignment>& assignments() const { return assignments_; }
  const std::vector<MergeRecord>& merges() const { return merges_; }
  // raw_seq -> model holding that alert's evidence after all merges.
  std::vector<Assignment> resolved_assignments() const;
  std::optional<Timestamp> clock() const { return clock_; }
  std::uint64_t actions() const { return actions_; }
  std::uint64_t exports() const { return exports_; }
  std::size_t open_streams() const { return tracker_.size(); }

 private:
  void on_clock(Timestamp t);
  void expire(Timestamp t);
  void collect(Timestamp now);
  void reindex(StreamId stream);
  void gc(Timestamp now);
  void run_export(Timestamp t);

  RunConfig config_;
  MappingTables tables_;
  PipelineHooks hooks_;
  StreamTracker tracker_;
  ModelSet models_;

  std::unordered_map<StreamId, std::unique_ptr<Segmenter>> segmenters_;
  std::set<std::pair<Timestamp, StreamId>> deadlines_;
  std::unordered_map<StreamId, Timestamp> deadline_of_;
  std::vector<ActionBatch> closed_;

  std::optional<Timestamp> clock_;
  std::optional<Timestamp> next_export_;
  std::optional<Timestamp> last_export_;
  std::optional<Timestamp> next_gc_;
  bool dirty_ = false;
  bool finished_ = false;

  std::vector<Assignment> assignments_;
  std::vector<MergeRecord> merges_;
  std::uint64_t actions_ = 0;
  std::uint64_t exports_ = 0;
};

struct RunSummary {
  IngestCounters ingest;
  std::uint64_t actions = 0;
  std::uint64_t aggregates = 0;
  std::uint64_t models_live = 0;
  std::uint64_t models_created = 0;
  std::uint64_t models_merged = 0;
  std::uint64_t models_retired = 0;
  std::uint64_t exports = 0;
  bool source_failed = false;
};

// Full run from configuration: loads mappings, reads the source until it
// ends (or `stop` is set), writes models-*.json, evidence.csv and
// run_stats.json into the export directory. Config errors throw ConfigError
// before anything is read.
RunSummary run(const RunConfig& config, std::ostream& log, const std::atomic<bool>* stop = nullptr);

}  // namespace alertsynth
