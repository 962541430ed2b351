#include "alertsynth/export.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace alertsynth {

namespace {

using nlohmann::ordered_json;

ordered_json sparse_pmf(const AttackModel& m, Component c, const MappingTables& tables) {
  std::vector<std::pair<std::string, double>> cells;
  const auto p = m.pmf(c);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] >= kExportMassFloor) cells.emplace_back(tables.label(c, static_cast<std::uint32_t>(i)), p[i]);
  }
  std::sort(cells.begin(), cells.end());
  ordered_json out = ordered_json::object();
  for (const auto& [label, v] : cells) out[label] = round_significant(v);
  return out;
}

}  // namespace

ordered_json export_models(std::span<const AttackModel> models, Timestamp now, const SynthConfig& config,
                           const MappingTables& tables) {
  const LabelFn label = [&](Component c, std::uint32_t v) { return tables.label(c, v); };
  ordered_json doc;
  doc["schema"] = kModelSchema;
  doc["export_ts"] = format_iso8601(now);
  doc["models"] = ordered_json::array();
  for (const auto& m : models) {
    ordered_json jm;
    jm["model_id"] = m.id;
    jm["created_at"] = format_iso8601(m.created_at);
    jm["last_update_ts"] = format_iso8601(m.last_update_ts);
    jm["effective_evidence"] = round_significant(effective_evidence(m, now, config.ewma_window));
    ordered_json pmfs;
    for (Component c : kAllComponents) pmfs[std::string(component_name(c))] = sparse_pmf(m, c, tables);
    jm["pmfs"] = std::move(pmfs);
    const auto features = characteristic_features(m, models, label);
    ordered_json chars;
    for (Component c : kAllComponents) {
      chars[std::string(component_name(c))] = tables.label(c, features[static_cast<std::size_t>(c)]);
    }
    jm["characteristic"] = std::move(chars);
    doc["models"].push_back(std::move(jm));
  }
  return doc;
}

std::string models_file_name(Timestamp now) {
  std::string stamp = format_iso8601_compact(now);
  const auto us = epoch_micros(now) % 1'000'000;
  if (us != 0) {
    char frac[16];
    std::snprintf(frac, sizeof frac, ".%06lld", static_cast<long long>(us < 0 ? us + 1'000'000 : us));
    stamp.insert(stamp.size() - 1, frac);
  }
  return "models-" + stamp + ".json";
}

std::filesystem::path write_models_file(const std::filesystem::path& dir, Timestamp now, const ordered_json& doc) {
  std::filesystem::create_directories(dir);
  const auto path = dir / models_file_name(now);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return path;
}

std::vector<EvidenceRow> evidence_rows(std::span<const AttackModel> models, Timestamp now, Duration window) {
  std::vector<EvidenceRow> rows;
  rows.reserve(models.size());
  for (const auto& m : models) rows.push_back({now, m.id, effective_evidence(m, now, window)});
  return rows;
}

void write_evidence_rows(std::ostream& out, std::span<const EvidenceRow> rows) {
  for (const auto& r : rows) {
    out << format_iso8601(r.export_ts) << ',' << r.model_id << ',' << format_decimal(r.effective_evidence) << '\n';
  }
}

std::string export_evidence_series(std::span<const EvidenceRow> history) {
  std::ostringstream out;
  out << kEvidenceHeader << '\n';
  write_evidence_rows(out, history);
  return out.str();
}

}  // namespace alertsynth
