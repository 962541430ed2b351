#include "alertsynth/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>

namespace alertsynth {

namespace {

double parse_real(std::string_view key, std::string_view text) {
  const std::string s(trim(text));
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw ConfigError(std::string(key) + ": expected a number, got '" + s + "'");
  }
  return v;
}

std::size_t parse_count(std::string_view key, std::string_view text) {
  const auto s = trim(text);
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError(std::string(key) + ": expected a nonnegative integer, got '" + std::string(s) + "'");
  }
  return v;
}

Duration parse_span(std::string_view key, std::string_view text) {
  auto d = parse_duration(text);
  if (!d) throw ConfigError(std::string(key) + ": expected a duration, got '" + std::string(text) + "'");
  return *d;
}

bool parse_flag(std::string_view key, std::string_view text) {
  const auto s = to_lower(trim(text));
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError(std::string(key) + ": expected true or false");
}

std::filesystem::path resolve(const std::filesystem::path& base, std::string_view text) {
  std::filesystem::path p{std::string(trim(text))};
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

}  // namespace

void RunConfig::validate() const {
  synth.validate();
  if (export_interval < std::chrono::seconds(1) || export_interval.count() % 1'000'000 != 0) {
    throw ConfigError("export_interval must be a positive whole number of seconds");
  }
  if (segmenter.tau <= Duration::zero()) throw ConfigError("tau must be positive");
  if (segmenter.bin_width <= Duration::zero()) throw ConfigError("bin_width must be positive");
  if (!(segmenter.sigma_bins > 0)) throw ConfigError("sigma_bins must be positive");
  if (!(segmenter.valley_frac > 0 && segmenter.valley_frac <= 1)) throw ConfigError("valley_frac must be in (0, 1]");
  if (segmenter.window_n < 2) throw ConfigError("window must be at least 2");
  if (!(segmenter.ks_alpha > 0 && segmenter.ks_alpha < 1)) throw ConfigError("ks_alpha must be in (0, 1)");
  if (segmenter.max_span < Duration::zero()) throw ConfigError("max_aggregate_span must not be negative");
  if (pivot_horizon < Duration::zero()) throw ConfigError("pivot_horizon must not be negative");
  if (idle_timeout <= Duration::zero()) throw ConfigError("idle_timeout must be positive");
  if (source.speedup < 0) throw ConfigError("speedup must not be negative");
}

ConfigMap parse_config_text(std::istream& in) {
  ConfigMap out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = line;
    if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    const auto key = trim(s.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    out[std::string(key)] = std::string(trim(s.substr(eq + 1)));
  }
  return out;
}

ConfigMap read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  return parse_config_text(in);
}

WeightConfig parse_weights(std::string_view text) {
  const auto parts = split(text, ',');
  if (parts.size() != kComponents) throw ConfigError("weights: expected four comma-separated values");
  return WeightConfig(parse_real("weights", parts[0]), parse_real("weights", parts[1]),
                      parse_real("weights", parts[2]), parse_real("weights", parts[3]));
}

RunConfig make_run_config(const ConfigMap& values, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  std::string source_text = "-";
  double speedup = 0;

  using Setter = std::function<void(std::string_view, std::string_view)>;
  const std::map<std::string_view, Setter> setters = {
      {"source", [&](auto, auto v) { source_text = std::string(trim(v)); }},
      {"speedup", [&](auto k, auto v) { speedup = parse_real(k, v); }},
      {"ais_map", [&](auto, auto v) { cfg.ais_map = resolve(base_dir, v); }},
      {"port_table", [&](auto, auto v) { cfg.port_table = resolve(base_dir, v); }},
      {"homenet", [&](auto, auto v) { cfg.homenet = resolve(base_dir, v); }},
      {"ais_categories",
       [&](auto, auto v) {
         cfg.ais_categories.clear();
         for (auto part : split(v, ',')) {
           if (!trim(part).empty()) cfg.ais_categories.emplace_back(trim(part));
         }
       }},
      {"segmenter",
       [&](auto k, auto v) {
         auto kind = parse_segmenter(trim(v));
         if (!kind) throw ConfigError(std::string(k) + ": unknown segmenter '" + std::string(v) + "'");
         cfg.segmenter.kind = *kind;
       }},
      {"tau", [&](auto k, auto v) { cfg.segmenter.tau = parse_span(k, v); }},
      {"bin_width", [&](auto k, auto v) { cfg.segmenter.bin_width = parse_span(k, v); }},
      {"sigma_bins", [&](auto k, auto v) { cfg.segmenter.sigma_bins = parse_real(k, v); }},
      {"valley_frac", [&](auto k, auto v) { cfg.segmenter.valley_frac = parse_real(k, v); }},
      {"window_n", [&](auto k, auto v) { cfg.segmenter.window_n = parse_count(k, v); }},
      {"ks_alpha", [&](auto k, auto v) { cfg.segmenter.ks_alpha = parse_real(k, v); }},
      {"max_aggregate_span", [&](auto k, auto v) { cfg.segmenter.max_span = parse_span(k, v); }},
      {"gamma", [&](auto k, auto v) { cfg.synth.gamma = parse_real(k, v); }},
      {"weights", [&](auto, auto v) { cfg.synth.weights = parse_weights(v); }},
      {"ewma_window", [&](auto k, auto v) { cfg.synth.ewma_window = parse_span(k, v); }},
      {"merge_threshold", [&](auto k, auto v) { cfg.synth.merge_threshold = parse_real(k, v); }},
      {"retire_floor", [&](auto k, auto v) { cfg.synth.retire_floor = parse_real(k, v); }},
      {"smoothing_eps", [&](auto k, auto v) { cfg.synth.smoothing_eps = parse_real(k, v); }},
      {"pivot_horizon", [&](auto k, auto v) { cfg.pivot_horizon = parse_span(k, v); }},
      {"idle_timeout", [&](auto k, auto v) { cfg.idle_timeout = parse_span(k, v); }},
      {"export_interval", [&](auto k, auto v) { cfg.export_interval = parse_span(k, v); }},
      {"export_dir", [&](auto, auto v) { cfg.export_dir = std::filesystem::path(std::string(trim(v))); }},
      {"clock_mode",
       [&](auto k, auto v) {
         const auto s = to_lower(trim(v));
         if (s == "event-time" || s == "event_time") {
           cfg.clock_mode = ClockMode::event_time;
         } else if (s == "wall-time" || s == "wall_time") {
           cfg.clock_mode = ClockMode::wall_time;
         } else {
           throw ConfigError(std::string(k) + ": expected event-time or wall-time");
         }
       }},
      {"write_assignments", [&](auto k, auto v) { cfg.write_assignments = parse_flag(k, v); }},
  };

  bool explicit_span = false;
  bool explicit_idle = false;
  for (const auto& [key, value] : values) {
    if (key.starts_with("alias.")) {
      cfg.aliases[key.substr(6)] = value;
      continue;
    }
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(key, value);
    if (key == "max_aggregate_span") explicit_span = true;
    if (key == "idle_timeout") explicit_idle = true;
  }
  // Both follow the EWMA window unless set on their own.
  if (!explicit_span) cfg.segmenter.max_span = cfg.synth.ewma_window;
  if (!explicit_idle) cfg.idle_timeout = 2 * cfg.synth.ewma_window;

  cfg.source = SourceSpec::parse(source_text, speedup);
  if (cfg.source.kind == SourceSpec::Kind::file_replay) {
    cfg.source.location = resolve(base_dir, cfg.source.location).string();
  }
  cfg.validate();
  return cfg;
}

}  // namespace alertsynth
