#include "alertsynth/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

namespace alertsynth {

namespace {

constexpr Duration kGcInterval = std::chrono::minutes(5);

Timestamp floor_to(Timestamp t, Duration step) {
  const auto us = epoch_micros(t);
  const auto s = step.count();
  const auto q = us >= 0 ? us / s : -((-us + s - 1) / s);
  return from_epoch_micros(q * s);
}

std::unique_ptr<std::istream> open_table(const std::filesystem::path& path, const char* what) {
  if (path.empty()) return std::make_unique<std::istringstream>("");
  auto in = std::make_unique<std::ifstream>(path);
  if (!*in) throw ConfigError(std::string("cannot read ") + what + " file " + path.string());
  return in;
}

}  // namespace

Pipeline::Pipeline(const RunConfig& config, MappingTables tables, PipelineHooks hooks)
    : config_(config),
      tables_(std::move(tables)),
      hooks_(std::move(hooks)),
      tracker_(tables_.homenet, config.pivot_horizon),
      models_(config.synth, tables_.sizes()) {
  config_.validate();
}

Action Pipeline::encode(const Alert& alert, const StreamAssignment& stream, Direction direction) const {
  Action a;
  a.ais = map_ais(alert, tables_);
  // The service is that of the internal endpoint.
  a.service = map_service(direction == Direction::outbound ? alert.src_port : alert.dst_port, alert.proto, tables_);
  a.maneuver = stream.maneuver;
  a.timebin = bin_elapsed(stream.elapsed);
  a.ts = alert.ts;
  a.stream_id = stream.stream_id;
  a.raw_seq = alert.raw_seq;
  return a;
}

void Pipeline::process(const Alert& alert, Timestamp clock) {
  require(!finished_, "Pipeline: process after finish");
  on_clock(clock);
  const Timestamp now = *clock_;

  const Direction dir = classify_direction(alert, tables_.homenet);
  const StreamAssignment sa = tracker_.assign(alert, dir);
  const Action action = encode(alert, sa, dir);
  ++actions_;

  auto& seg = segmenters_[sa.stream_id];
  if (!seg) seg = make_segmenter(config_.segmenter);
  seg->push(action, closed_);
  reindex(sa.stream_id);
  collect(now);
}

void Pipeline::advance(Timestamp clock) {
  require(!finished_, "Pipeline: advance after finish");
  on_clock(clock);
}

void Pipeline::on_clock(Timestamp t) {
  if (clock_ && t < *clock_) t = *clock_;
  clock_ = t;
  if (!next_export_) next_export_ = floor_to(t, config_.export_interval) + config_.export_interval;
  if (!next_gc_) next_gc_ = t + kGcInterval;

  while (*next_export_ <= t) {
    const Timestamp boundary = *next_export_;
    expire(boundary);
    if (*next_gc_ <= boundary) gc(boundary);
    run_export(boundary);
    *next_export_ += config_.export_interval;
  }
  expire(t);
  if (*next_gc_ <= t) gc(t);
}

void Pipeline::expire(Timestamp t) {
  while (!deadlines_.empty() && deadlines_.begin()->first < t) {
    const auto [due, stream] = *deadlines_.begin();
    deadlines_.erase(deadlines_.begin());
    deadline_of_.erase(stream);
    auto it = segmenters_.find(stream);
    if (it == segmenters_.end()) continue;
    it->second->advance(t, closed_);
    const auto next = it->second->deadline();
    // A segmenter that made no progress waits for its next action.
    if (next && *next > due) reindex(stream);
    if (it->second->empty()) segmenters_.erase(it);
  }
  collect(t);
}

void Pipeline::reindex(StreamId stream) {
  if (auto old = deadline_of_.find(stream); old != deadline_of_.end()) {
    deadlines_.erase({old->second, stream});
    deadline_of_.erase(old);
  }
  auto it = segmenters_.find(stream);
  if (it == segmenters_.end()) return;
  if (auto d = it->second->deadline()) {
    deadlines_.emplace(*d, stream);
    deadline_of_[stream] = *d;
  }
}

void Pipeline::collect(Timestamp now) {
  if (closed_.empty()) return;
  std::vector<Aggregate> aggs;
  aggs.reserve(closed_.size());
  for (auto& batch : closed_) aggs.push_back(build_aggregate(std::move(batch)));
  closed_.clear();
  std::sort(aggs.begin(), aggs.end(), [](const Aggregate& a, const Aggregate& b) {
    return std::pair(a.t_end, a.stream_id) < std::pair(b.t_end, b.stream_id);
  });
  for (const auto& agg : aggs) {
    auto outcome = models_.absorb(agg, now);
    if (config_.write_assignments) {
      for (const auto& a : agg.actions) assignments_.push_back({a.raw_seq, outcome.model});
    }
    merges_.insert(merges_.end(), outcome.merges.begin(), outcome.merges.end());
    dirty_ = true;
  }
}

void Pipeline::gc(Timestamp now) {
  *next_gc_ = now + kGcInterval;
  for (StreamId id : tracker_.gc(now, config_.idle_timeout)) {
    auto it = segmenters_.find(id);
    if (it == segmenters_.end()) continue;
    it->second->flush(closed_);
    segmenters_.erase(it);
    reindex(id);
  }
  collect(now);
}

void Pipeline::run_export(Timestamp t) {
  models_.retire(t);
  const auto& live = models_.models();
  if (hooks_.models) hooks_.models(t, export_models(live, t, config_.synth, tables_));
  if (hooks_.evidence) {
    const auto rows = evidence_rows(live, t, config_.synth.ewma_window);
    hooks_.evidence(rows);
  }
  last_export_ = t;
  dirty_ = false;
  ++exports_;
}

void Pipeline::finish(Timestamp clock) {
  if (finished_) return;
  on_clock(clock);
  finish();
}

void Pipeline::finish() {
  if (finished_) return;
  const Timestamp now = clock_.value_or(Timestamp{});
  std::vector<StreamId> ids;
  ids.reserve(segmenters_.size());
  for (const auto& [id, seg] : segmenters_) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  for (StreamId id : ids) segmenters_.at(id)->flush(closed_);
  segmenters_.clear();
  deadlines_.clear();
  deadline_of_.clear();
  collect(now);
  if (!last_export_ || *last_export_ != now || dirty_) run_export(now);
  finished_ = true;
}

std::vector<Assignment> Pipeline::resolved_assignments() const {
  std::vector<Assignment> out = assignments_;
  for (auto& a : out) a.model = models_.resolve(a.model);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.raw_seq < b.raw_seq; });
  return out;
}

RunSummary run(const RunConfig& config, std::ostream& log, const std::atomic<bool>* stop) {
  config.validate();
  auto ais_in = open_table(config.ais_map, "ais_map");
  auto ports_in = open_table(config.port_table, "port_table");
  auto homenet_in = open_table(config.homenet, "homenet");
  MappingTables tables = load_mappings(*ais_in, *ports_in, *homenet_in, config.ais_categories);

  AlertReader reader = open_source(config.source, config.aliases, stop);

  const auto& dir = config.export_dir;
  std::filesystem::create_directories(dir);
  std::ofstream evidence(dir / "evidence.csv", std::ios::binary | std::ios::trunc);
  if (!evidence) throw ConfigError("cannot write to export directory " + dir.string());
  evidence << kEvidenceHeader << '\n';

  PipelineHooks hooks;
  hooks.models = [&](Timestamp t, const nlohmann::ordered_json& doc) { write_models_file(dir, t, doc); };
  hooks.evidence = [&](std::span<const EvidenceRow> rows) {
    write_evidence_rows(evidence, rows);
    evidence.flush();
  };
  Pipeline pipeline(config, std::move(tables), std::move(hooks));

  const bool wall = config.clock_mode == ClockMode::wall_time;
  auto wall_now = [] { return std::chrono::time_point_cast<Duration>(std::chrono::system_clock::now()); };

  RunSummary summary;
  Alert alert;
  for (;;) {
    const auto status = reader.next(alert);
    if (status == AlertReader::Status::alert) {
      pipeline.process(alert, wall ? wall_now() : alert.ts);
    } else if (status == AlertReader::Status::idle) {
      if (wall) pipeline.advance(wall_now());
      if (stop && stop->load()) break;
    } else if (status == AlertReader::Status::end) {
      break;
    } else {
      summary.source_failed = true;
      log << "source error; flushing and shutting down\n";
      break;
    }
  }
  if (wall) {
    pipeline.finish(wall_now());
  } else {
    pipeline.finish();
  }

  const auto& st = pipeline.models().stats();
  summary.ingest = reader.counters();
  summary.actions = pipeline.actions();
  summary.aggregates = st.aggregates;
  summary.models_live = pipeline.models().models().size();
  summary.models_created = st.created;
  summary.models_merged = st.merged;
  summary.models_retired = st.retired;
  summary.exports = pipeline.exports();

  nlohmann::ordered_json stats;
  stats["alerts_in"] = summary.ingest.lines;
  stats["rejected"] = summary.ingest.rejected();
  stats["malformed"] = summary.ingest.malformed;
  stats["missing_field"] = summary.ingest.missing_field;
  stats["out_of_order"] = summary.ingest.out_of_order;
  stats["actions"] = summary.actions;
  stats["aggregates"] = summary.aggregates;
  stats["models_live"] = summary.models_live;
  stats["models_created"] = summary.models_created;
  stats["models_merged"] = summary.models_merged;
  stats["models_retired"] = summary.models_retired;
  stats["exports"] = summary.exports;
  nlohmann::ordered_json hist = nlohmann::ordered_json::object();
  for (const auto& [merges, passes] : st.merges_per_pass) hist[std::to_string(merges)] = passes;
  stats["merges_per_pass"] = std::move(hist);
  std::ofstream(dir / "run_stats.json", std::ios::binary | std::ios::trunc) << stats.dump(2) << '\n';

  if (config.write_assignments) {
    std::ofstream out(dir / "assignments.csv", std::ios::binary | std::ios::trunc);
    out << "raw_seq,model_id\n";
    for (const auto& a : pipeline.resolved_assignments()) out << a.raw_seq << ',' << a.model << '\n';
    std::ofstream m(dir / "merges.csv", std::ios::binary | std::ios::trunc);
    m << "ts,absorbed,into,jsd\n";
    for (const auto& r : pipeline.merges()) {
      m << format_iso8601(r.ts) << ',' << r.absorbed << ',' << r.into << ',' << format_decimal(r.jsd) << '\n';
    }
  }

  log << "alerts in:      " << summary.ingest.lines << '\n'
      << "rejected:       " << summary.ingest.rejected() << " (malformed " << summary.ingest.malformed
      << ", missing field " << summary.ingest.missing_field << ")\n"
      << "out of order:   " << summary.ingest.out_of_order << '\n'
      << "aggregates:     " << summary.aggregates << '\n'
      << "models live:    " << summary.models_live << '\n'
      << "models created: " << summary.models_created << '\n'
      << "models merged:  " << summary.models_merged << '\n'
      << "models retired: " << summary.models_retired << '\n';
  return summary;
}

}  // namespace alertsynth
