#include "alertsynth/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "alertsynth/info_theory.hpp"

namespace alertsynth {

void SynthConfig::validate() const {
  if (!(gamma > 0 && gamma <= 1)) throw ConfigError("gamma must be in (0, 1]");
  if (ewma_window <= Duration::zero()) throw ConfigError("ewma window must be positive");
  if (!(merge_threshold > 0)) throw ConfigError("merge threshold must be positive");
  if (!(retire_floor > 0)) throw ConfigError("retire floor must be positive");
  if (!(smoothing_eps > 0 && smoothing_eps < 1)) throw ConfigError("smoothing eps must be in (0, 1)");
}

void AttackModel::refresh(double eps) {
  for (std::size_t c = 0; c < kComponents; ++c) {
    smoothed[c] = smoothed_pmf(counts[c], eps);
    log_smoothed[c].resize(smoothed[c].size());
    for (std::size_t i = 0; i < smoothed[c].size(); ++i) log_smoothed[c][i] = std::log(smoothed[c][i]);
  }
}

std::vector<double> AttackModel::pmf(Component c) const {
  const auto& v = counts[static_cast<std::size_t>(c)];
  std::vector<double> p(v.size(), 0.0);
  if (evidence <= 0) return p;
  for (std::size_t i = 0; i < v.size(); ++i) p[i] = v[i] / evidence;
  return p;
}

double decay_factor(Duration elapsed, Duration window) {
  if (elapsed <= Duration::zero()) return 1.0;
  // Half-life of half a window.
  return std::exp2(-to_seconds(elapsed) / (0.5 * to_seconds(window)));
}

void decay(AttackModel& model, Timestamp now, Duration window) {
  require(now >= model.last_decay_ts, "decay: time went backwards");
  const double f = decay_factor(now - model.last_decay_ts, window);
  if (f != 1.0) {
    for (auto& v : model.counts) {
      for (double& x : v) x *= f;
    }
    model.evidence *= f;
  }
  model.last_decay_ts = now;
}

double effective_evidence(const AttackModel& model, Timestamp now, Duration window) {
  return model.evidence * decay_factor(now - model.last_decay_ts, window);
}

double model_distance(const Aggregate& agg, const AttackModel& model, const WeightConfig& weights) {
  double d = 0;
  for (Component c : kAllComponents) {
    const double w = weights[c];
    if (w == 0) continue;
    const auto& log_q = model.log_smoothed[static_cast<std::size_t>(c)];
    double h = 0;
    for (const auto& [i, p] : agg.pmfs[static_cast<std::size_t>(c)].cells) {
      require(i < log_q.size(), "model_distance: value outside component");
      h -= p * log_q[i];
    }
    d += w * h;
  }
  return d;
}

std::optional<BestModel> best_model(const Aggregate& agg, std::span<const AttackModel> models,
                                    const WeightConfig& weights) {
  std::optional<BestModel> best;
  for (const auto& m : models) {
    const double d = model_distance(agg, m, weights);
    if (!best || d < best->distance || (d == best->distance && m.id < best->id)) best = BestModel{m.id, d};
  }
  return best;
}

double admission_bound(const PerComponent<std::size_t>& sizes, const SynthConfig& config) {
  double bound = 0;
  for (Component c : kAllComponents) {
    bound += config.weights[c] * std::log(static_cast<double>(sizes[static_cast<std::size_t>(c)]));
  }
  return bound - std::log(config.gamma);
}

Admission admit(double distance, const PerComponent<std::size_t>& sizes, const SynthConfig& config) {
  return distance < admission_bound(sizes, config) ? Admission::associate : Admission::create;
}

AttackModel create_model(const Aggregate& agg, Timestamp now, ModelId id, const PerComponent<std::size_t>& sizes,
                         const SynthConfig& config) {
  require(agg.n > 0, "create_model: empty aggregate");
  AttackModel m;
  m.id = id;
  const double n = static_cast<double>(agg.n);
  for (std::size_t c = 0; c < kComponents; ++c) {
    m.counts[c].assign(sizes[c], 0.0);
    for (const auto& [i, p] : agg.pmfs[c].cells) m.counts[c].at(i) += n * p;
  }
  m.evidence = n;
  m.created_at = now;
  m.last_update_ts = now;
  m.last_decay_ts = now;
  m.refresh(config.smoothing_eps);
  return m;
}

void update_model(AttackModel& model, const Aggregate& agg, Timestamp now, const SynthConfig& config) {
  decay(model, now, config.ewma_window);
  const double n = static_cast<double>(agg.n);
  for (std::size_t c = 0; c < kComponents; ++c) {
    for (const auto& [i, p] : agg.pmfs[c].cells) model.counts[c].at(i) += n * p;
  }
  model.evidence += n;
  model.last_update_ts = now;
  model.refresh(config.smoothing_eps);
}

double model_jsd(const AttackModel& a, const AttackModel& b, const WeightConfig& weights) {
  double d = 0;
  for (Component c : kAllComponents) {
    const double w = weights[c];
    if (w == 0) continue;
    const auto i = static_cast<std::size_t>(c);
    d += w * js_divergence(a.smoothed[i], b.smoothed[i]);
  }
  return d;
}

void merge_models(AttackModel& larger, AttackModel smaller, Timestamp now, const SynthConfig& config) {
  decay(larger, std::max(now, larger.last_decay_ts), config.ewma_window);
  decay(smaller, larger.last_decay_ts, config.ewma_window);
  for (std::size_t c = 0; c < kComponents; ++c) {
    for (std::size_t i = 0; i < larger.counts[c].size(); ++i) larger.counts[c][i] += smaller.counts[c][i];
  }
  larger.evidence += smaller.evidence;
  larger.created_at = std::min(larger.created_at, smaller.created_at);
  larger.last_update_ts = std::max(larger.last_update_ts, smaller.last_update_ts);
  larger.refresh(config.smoothing_eps);
}

namespace {

// True when `a` absorbs `b`: more evidence at `now`, ties to the lower id.
bool is_larger(const AttackModel& a, const AttackModel& b, Timestamp now, Duration window) {
  const double ea = effective_evidence(a, now, window);
  const double eb = effective_evidence(b, now, window);
  return ea > eb || (ea == eb && a.id < b.id);
}

}  // namespace

std::vector<MergeRecord> merge_pass(std::vector<AttackModel>& models, Timestamp now, const SynthConfig& config) {
  std::vector<MergeRecord> merges;
  std::sort(models.begin(), models.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  while (models.size() >= 2) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < models.size(); ++i) {
      for (std::size_t j = i + 1; j < models.size(); ++j) {
        const double d = model_jsd(models[i], models[j], config.weights);
        if (d < best) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    }
    if (!(best < config.merge_threshold)) break;
    if (!is_larger(models[bi], models[bj], now, config.ewma_window)) std::swap(bi, bj);
    merges.push_back(MergeRecord{models[bj].id, models[bi].id, best, now});
    merge_models(models[bi], std::move(models[bj]), now, config);
    models.erase(models.begin() + static_cast<std::ptrdiff_t>(bj));
  }
  return merges;
}

std::vector<AttackModel> retire_pass(std::vector<AttackModel>& models, Timestamp now, const SynthConfig& config) {
  std::vector<AttackModel> retired;
  std::vector<AttackModel> kept;
  kept.reserve(models.size());
  for (auto& m : models) {
    decay(m, std::max(now, m.last_decay_ts), config.ewma_window);
    if (m.evidence < config.retire_floor && now - m.last_update_ts > config.ewma_window) {
      retired.push_back(std::move(m));
    } else {
      kept.push_back(std::move(m));
    }
  }
  models = std::move(kept);
  return retired;
}

PerComponent<std::uint32_t> characteristic_features(const AttackModel& model, std::span<const AttackModel> models,
                                                    const LabelFn& label) {
  PerComponent<std::uint32_t> out{};
  for (Component c : kAllComponents) {
    const auto ci = static_cast<std::size_t>(c);
    const auto& counts = model.counts[ci];
    bool have = false;
    std::uint32_t best = 0;
    double best_score = 0;
    std::string best_label;
    for (std::size_t x = 0; x < counts.size(); ++x) {
      if (!(counts[x] > 0)) continue;
      const double p = counts[x] / model.evidence;
      double score = p;
      bool has_other = false;
      double max_other = 0;
      for (const auto& other : models) {
        if (other.id == model.id) continue;
        has_other = true;
        max_other = std::max(max_other, other.smoothed[ci][x]);
      }
      if (has_other) score = p * -std::log(max_other);
      const auto xi = static_cast<std::uint32_t>(x);
      if (!have || score > best_score) {
        have = true;
        best = xi;
        best_score = score;
        best_label.clear();
      } else if (score == best_score) {
        if (best_label.empty()) best_label = label(c, best);
        auto candidate = label(c, xi);
        if (candidate < best_label) {
          best = xi;
          best_label = std::move(candidate);
        }
      }
    }
    out[ci] = best;
  }
  return out;
}

ModelSet::ModelSet(SynthConfig config, PerComponent<std::size_t> sizes) : config_(std::move(config)), sizes_(sizes) {
  config_.validate();
  for (auto s : sizes_) require(s > 0, "ModelSet: empty component");
}

std::size_t ModelSet::index_of(ModelId id) const {
  auto it = std::lower_bound(models_.begin(), models_.end(), id, [](const auto& m, ModelId v) { return m.id < v; });
  require(it != models_.end() && it->id == id, "ModelSet: unknown model id");
  return static_cast<std::size_t>(it - models_.begin());
}

const AttackModel* ModelSet::find(ModelId id) const {
  auto it = std::lower_bound(models_.begin(), models_.end(), id, [](const auto& m, ModelId v) { return m.id < v; });
  return it != models_.end() && it->id == id ? &*it : nullptr;
}

ModelId ModelSet::resolve(ModelId id) const {
  for (auto it = merged_into_.find(id); it != merged_into_.end(); it = merged_into_.find(id)) id = it->second;
  return id;
}

void ModelSet::refresh_row(const AttackModel& m) {
  for (const auto& other : models_) {
    if (other.id == m.id) continue;
    const auto key = std::minmax(m.id, other.id);
    jsd_[{key.first, key.second}] = model_jsd(m, other, config_.weights);
  }
}

void ModelSet::drop_rows(ModelId id) {
  std::erase_if(jsd_, [id](const auto& e) { return e.first.first == id || e.first.second == id; });
}

std::vector<MergeRecord> ModelSet::run_merges(Timestamp now) {
  std::vector<MergeRecord> merges;
  while (models_.size() >= 2 && !jsd_.empty()) {
    auto best = jsd_.begin();
    for (auto it = jsd_.begin(); it != jsd_.end(); ++it) {
      if (it->second < best->second) best = it;
    }
    if (!(best->second < config_.merge_threshold)) break;
    auto [a, b] = best->first;
    const double d = best->second;
    if (!is_larger(models_[index_of(a)], models_[index_of(b)], now, config_.ewma_window)) std::swap(a, b);
    const auto bi = index_of(b);
    AttackModel absorbed = std::move(models_[bi]);
    models_.erase(models_.begin() + static_cast<std::ptrdiff_t>(bi));
    drop_rows(b);
    AttackModel& into = models_[index_of(a)];
    merge_models(into, std::move(absorbed), now, config_);
    refresh_row(into);
    merged_into_[b] = a;
    merges.push_back(MergeRecord{b, a, d, now});
  }
  return merges;
}

std::vector<AttackModel> ModelSet::retire(Timestamp now) {
  // Read-only projection first; only retiring models are decayed and copied.
  const bool any = std::any_of(models_.begin(), models_.end(), [&](const AttackModel& m) {
    return effective_evidence(m, now, config_.ewma_window) < config_.retire_floor &&
           now - m.last_update_ts > config_.ewma_window;
  });
  if (!any) return {};
  auto retired = retire_pass(models_, now, config_);
  for (const auto& m : retired) drop_rows(m.id);
  stats_.retired += retired.size();
  return retired;
}

AbsorbOutcome ModelSet::absorb(const Aggregate& agg, Timestamp now) {
  AbsorbOutcome out;
  out.retired = retire(now);

  const auto best = best_model(agg, models_, config_.weights);
  out.distance = best ? best->distance : std::numeric_limits<double>::infinity();
  if (best && admit(best->distance, sizes_, config_) == Admission::associate) {
    AttackModel& m = models_[index_of(best->id)];
    update_model(m, agg, now, config_);
    refresh_row(m);
    out.model = m.id;
  } else {
    const ModelId id = next_id_++;
    models_.push_back(create_model(agg, now, id, sizes_, config_));
    refresh_row(models_.back());
    out.model = id;
    out.created = true;
    ++stats_.created;
  }

  out.merges = run_merges(now);
  ++stats_.merge_passes;
  ++stats_.merges_per_pass[out.merges.size()];
  stats_.merged += out.merges.size();
  ++stats_.aggregates;
  stats_.actions += agg.n;
  return out;
}

}  // namespace alertsynth
