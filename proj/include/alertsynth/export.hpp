#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "alertsynth/action_space.hpp"
#include "alertsynth/synthesis.hpp"

namespace alertsynth {

inline constexpr std::string_view kModelSchema = "assert-models/1";
// Cells with less mass are left out of exported pmfs.
inline constexpr double kExportMassFloor = 1e-9;

// Snapshot of the model set at `now`: evidence is projected to `now`, numbers
// are rounded to 9 significant digits, keys come out in a fixed order.
nlohmann::ordered_json export_models(std::span<const AttackModel> models, Timestamp now, const SynthConfig& config,
                                     const MappingTables& tables);

// "models-20200724T120000Z.json"; sub-second times keep their microseconds.
std::string models_file_name(Timestamp now);
std::filesystem::path write_models_file(const std::filesystem::path& dir, Timestamp now,
                                        const nlohmann::ordered_json& doc);

struct EvidenceRow {
  Timestamp export_ts;
  ModelId model_id = 0;
  double effective_evidence = 0;
};

std::vector<EvidenceRow> evidence_rows(std::span<const AttackModel> models, Timestamp now, Duration window);

inline constexpr std::string_view kEvidenceHeader = "export_ts,model_id,effective_evidence";
void write_evidence_rows(std::ostream& out, std::span<const EvidenceRow> rows);
// Header plus rows, in the order given.
std::string export_evidence_series(std::span<const EvidenceRow> history);

}  // namespace alertsynth
