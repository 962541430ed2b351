// Command-line front end: run the engine, generate scenarios, score results.

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "alertsynth/config.hpp"
#include "alertsynth/harness.hpp"
#include "alertsynth/pipeline.hpp"

namespace fs = std::filesystem;
using namespace alertsynth;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

struct RunOptions {
  std::string config;
  std::vector<std::string> sets;
  std::string gamma, tau, segmenter, window, weights, export_interval, source, speedup, export_dir;
  std::string ais_map, port_table, homenet, clock;
  bool write_assignments = false;
};

int do_run(const RunOptions& o) {
  ConfigMap values;
  fs::path base;
  if (!o.config.empty()) {
    values = read_config_file(o.config);
    base = fs::absolute(o.config).parent_path();
  }
  auto put = [&](const char* key, const std::string& v) {
    if (!v.empty()) values[key] = v;
  };
  // Paths given on the command line are relative to the working directory.
  auto put_path = [&](const char* key, const std::string& v) {
    if (!v.empty()) values[key] = fs::absolute(v).string();
  };
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    values[std::string(trim(std::string_view(kv).substr(0, eq)))] = std::string(trim(std::string_view(kv).substr(eq + 1)));
  }
  put("gamma", o.gamma);
  put("tau", o.tau);
  put("segmenter", o.segmenter);
  put("ewma_window", o.window);
  put("weights", o.weights);
  put("export_interval", o.export_interval);
  put("speedup", o.speedup);
  put("clock_mode", o.clock);
  put_path("ais_map", o.ais_map);
  put_path("port_table", o.port_table);
  put_path("homenet", o.homenet);
  put_path("export_dir", o.export_dir);
  if (!o.source.empty()) {
    const auto spec = SourceSpec::parse(o.source);
    values["source"] = spec.kind == SourceSpec::Kind::file_replay ? fs::absolute(spec.location).string() : o.source;
  }
  if (o.write_assignments) values["write_assignments"] = "true";

  const RunConfig cfg = make_run_config(values, base);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const auto summary = run(cfg, std::cerr, &g_stop);
  return summary.source_failed ? 2 : 0;
}

int do_generate(const std::string& scenario_path, const std::string& out_path, const std::string& truth_path,
                const std::optional<std::uint64_t>& seed) {
  auto values = read_config_file(scenario_path);
  if (seed) values["seed"] = std::to_string(*seed);
  const auto scenario = generate_scenario(make_scenario(values));
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  std::ofstream truth(truth_path, std::ios::binary | std::ios::trunc);
  if (!out || !truth) {
    std::cerr << "cannot open output files\n";
    return 2;
  }
  write_alerts(out, scenario);
  write_truth(truth, scenario);
  std::cerr << "wrote " << scenario.alerts.size() << " alerts\n";
  return 0;
}

int do_score(const std::string& truth_path, const std::string& assignments_path) {
  std::ifstream t(truth_path), a(assignments_path);
  if (!t || !a) {
    std::cerr << "cannot open input files\n";
    return 2;
  }
  const auto truth = read_truth(t);
  const auto assignments = read_assignments(a);
  const auto score = score_recovery(truth, assignments);
  std::cout << "purity " << format_decimal(score.purity) << '\n' << "models " << score.model_count << '\n';
  for (const auto& [label, model] : score.majority) {
    std::cout << label << ' ' << model << ' ' << score.label_sizes.at(label) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"alertsynth: summarize intrusion alert streams into attack models"};
  app.require_subcommand(1);

  RunOptions ro;
  auto* run_cmd = app.add_subcommand("run", "Run the engine over an alert source");
  run_cmd->add_option("--config", ro.config, "key=value config file");
  run_cmd->add_option("--set", ro.sets, "Override any config key (key=value)");
  run_cmd->add_option("--gamma", ro.gamma, "Model creation parameter in (0,1]");
  run_cmd->add_option("--tau", ro.tau, "Gap threshold, e.g. 600s");
  run_cmd->add_option("--segmenter", ro.segmenter, "threshold | gaussian | controlchart");
  run_cmd->add_option("--window", ro.window, "EWMA window, e.g. 6h");
  run_cmd->add_option("--weights", ro.weights, "Component weights a,s,v,t");
  run_cmd->add_option("--export-interval", ro.export_interval, "e.g. 1h");
  run_cmd->add_option("--source", ro.source, "file path, file:<path>, stdin, - or tcp:<host>:<port>");
  run_cmd->add_option("--speedup", ro.speedup, "Replay speed multiplier, 0 = no pacing");
  run_cmd->add_option("--export-dir", ro.export_dir, "Output directory");
  run_cmd->add_option("--ais-map", ro.ais_map, "Signature to attack stage table");
  run_cmd->add_option("--port-table", ro.port_table, "Port to service table");
  run_cmd->add_option("--homenet", ro.homenet, "Internal CIDR list");
  run_cmd->add_option("--clock", ro.clock, "event-time | wall-time");
  run_cmd->add_flag("--write-assignments", ro.write_assignments, "Write assignments.csv and merges.csv");

  std::string scenario, out = "alerts.jsonl", truth = "truth.csv";
  std::optional<std::uint64_t> seed;
  auto* gen_cmd = app.add_subcommand("generate", "Generate a labelled synthetic scenario");
  gen_cmd->add_option("--scenario", scenario, "Scenario config file")->required();
  gen_cmd->add_option("--out", out, "Alert JSON-lines output");
  gen_cmd->add_option("--truth", truth, "Ground truth CSV output");
  gen_cmd->add_option("--seed", seed, "Override the scenario seed");

  std::string score_truth, score_assign;
  auto* score_cmd = app.add_subcommand("score", "Score model recovery against ground truth");
  score_cmd->add_option("--truth", score_truth, "Ground truth CSV")->required();
  score_cmd->add_option("--assignments", score_assign, "assignments.csv from a run")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return do_run(ro);
    if (*gen_cmd) return do_generate(scenario, out, truth, seed);
    if (*score_cmd) return do_score(score_truth, score_assign);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const SourceError& e) {
    std::cerr << "source error: " << e.what() << '\n';
    return 2;
  } catch (const ScoringError& e) {
    std::cerr << "scoring error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
