#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "alertsynth/export.hpp"
#include "fixtures.hpp"

using namespace alertsynth;
using namespace std::chrono_literals;

namespace {

AttackModel model_of(ModelId id, std::size_t n, std::uint32_t ais, std::uint32_t service, double t,
                     const MappingTables& tables, const SynthConfig& cfg) {
  std::vector<Action> acts;
  for (std::size_t i = 0; i < n; ++i) acts.push_back(fixtures::action(ais, service, 2, 3, t));
  return create_model(build_aggregate(std::move(acts)), fixtures::at(t), id, tables.sizes(), cfg);
}

}  // namespace

TEST(ExportModels, OneHotModel) {
  const auto tables = fixtures::default_tables();
  SynthConfig cfg;
  std::vector<AttackModel> models{model_of(1, 4, *tables.ais.find("BruteForce"), 0, 0, tables, cfg)};
  const auto doc = export_models(models, fixtures::at(0), cfg, tables);
  EXPECT_EQ(doc["schema"], "assert-models/1");
  EXPECT_EQ(doc["export_ts"], "2020-07-24T00:00:00.000000Z");
  ASSERT_EQ(doc["models"].size(), 1u);
  const auto& m = doc["models"][0];
  EXPECT_EQ(m["model_id"], 1);
  EXPECT_EQ(m["effective_evidence"], 4.0);
  for (const char* c : {"ais", "service", "maneuver", "timebin"}) {
    ASSERT_EQ(m["pmfs"][c].size(), 1u) << c;
    EXPECT_EQ(m["pmfs"][c].begin().value(), 1.0) << c;
  }
  EXPECT_EQ(m["pmfs"]["ais"].begin().key(), "BruteForce");
  EXPECT_EQ(m["characteristic"]["ais"], "BruteForce");
  // Keys come out in a fixed order.
  std::vector<std::string> keys;
  for (auto it = m.begin(); it != m.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"model_id", "created_at", "last_update_ts", "effective_evidence", "pmfs",
                                            "characteristic"}));
}

TEST(ExportModels, EvidenceIsProjectedToExportTime) {
  const auto tables = fixtures::default_tables();
  SynthConfig cfg;
  std::vector<AttackModel> models{model_of(1, 100, 1, 0, 0, tables, cfg)};
  const auto doc = export_models(models, fixtures::at(3 * 3600), cfg, tables);
  EXPECT_EQ(doc["models"][0]["effective_evidence"], 50.0);
  EXPECT_DOUBLE_EQ(models[0].evidence, 100.0);
}

TEST(ExportModels, PmfsSumToOneAndAreSorted) {
  const auto tables = fixtures::default_tables();
  SynthConfig cfg;
  auto m = model_of(1, 3, 1, 0, 0, tables, cfg);
  update_model(m, build_aggregate({fixtures::action(4, 2, 0, 0), fixtures::action(7, 5, 1, 1)}), fixtures::at(60), cfg);
  std::vector<AttackModel> models{m};
  const auto doc = export_models(models, fixtures::at(60), cfg, tables);
  for (const auto& [component, pmf] : doc["models"][0]["pmfs"].items()) {
    double total = 0;
    std::string prev;
    for (const auto& [label, p] : pmf.items()) {
      EXPECT_LT(prev, label);
      prev = label;
      total += p.get<double>();
    }
    EXPECT_NEAR(total, 1.0, 1e-6) << component;
  }
}

TEST(ExportModels, SameInputSameBytes) {
  const auto tables = fixtures::default_tables();
  SynthConfig cfg;
  std::vector<AttackModel> models{model_of(1, 3, 1, 0, 0, tables, cfg), model_of(2, 5, 3, 4, 10, tables, cfg)};
  fixtures::TempDir a("export-a"), b("export-b");
  const auto pa = write_models_file(a.path(), fixtures::at(3600), export_models(models, fixtures::at(3600), cfg, tables));
  const auto pb = write_models_file(b.path(), fixtures::at(3600), export_models(models, fixtures::at(3600), cfg, tables));
  std::ifstream fa(pa), fb(pb);
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  EXPECT_FALSE(sa.str().empty());
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(pa.filename(), "models-20200724T010000Z.json");
}

TEST(ModelsFileName, KeepsMicroseconds) {
  EXPECT_EQ(models_file_name(fixtures::at(0)), "models-20200724T000000Z.json");
  EXPECT_EQ(models_file_name(fixtures::at(1.5)), "models-20200724T000001.500000Z.json");
}

TEST(EvidenceSeries, RowsPerExportAndModel) {
  const auto tables = fixtures::default_tables();
  SynthConfig cfg;
  std::vector<AttackModel> models{model_of(1, 10, 1, 0, 0, tables, cfg), model_of(2, 8, 3, 4, 0, tables, cfg)};
  std::vector<EvidenceRow> history;
  for (int k = 1; k <= 3; ++k) {
    auto rows = evidence_rows(models, fixtures::at(k * 3600), cfg.ewma_window);
    history.insert(history.end(), rows.begin(), rows.end());
  }
  const auto csv = export_evidence_series(history);
  std::istringstream in(csv);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 7u);
  EXPECT_EQ(lines[0], "export_ts,model_id,effective_evidence");
  EXPECT_EQ(lines[1], "2020-07-24T01:00:00.000000Z,1," + format_decimal(10 * std::exp2(-1.0 / 3.0)));
  EXPECT_EQ(lines[6].substr(0, 30), "2020-07-24T03:00:00.000000Z,2,");
}
