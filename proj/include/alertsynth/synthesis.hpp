#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "alertsynth/action_space.hpp"
#include "alertsynth/aggregation.hpp"
#include "alertsynth/common.hpp"

namespace alertsynth {

using ModelId = std::uint64_t;

struct SynthConfig {
  double gamma = 2.0 / 3.0;
  WeightConfig weights;
  Duration ewma_window = std::chrono::hours(6);
  double merge_threshold = 0.15;  // nats
  double retire_floor = 1.0;      // evidence units
  double smoothing_eps = 1e-6;

  // Throws ConfigError.
  void validate() const;
};

// A live attack model: per-component EWMA count vectors whose common mass is
// the effective evidence.
struct AttackModel {
  ModelId id = 0;
  PerComponent<std::vector<double>> counts;
  double evidence = 0;
  Timestamp created_at;
  Timestamp last_update_ts;
  Timestamp last_decay_ts;

  // Cached smoothed pmfs and their logs. Decay scales all counts uniformly, so
  // only updates and merges invalidate them.
  PerComponent<std::vector<double>> smoothed;
  PerComponent<std::vector<double>> log_smoothed;

  void refresh(double eps);
  std::vector<double> pmf(Component c) const;  // counts / evidence, unsmoothed
};

double decay_factor(Duration elapsed, Duration window);
void decay(AttackModel& model, Timestamp now, Duration window);
// Evidence projected to `now` without touching the model.
double effective_evidence(const AttackModel& model, Timestamp now, Duration window);

// Weighted sum over components of H(p'_i, smoothed p_i).
double model_distance(const Aggregate& agg, const AttackModel& model, const WeightConfig& weights);

struct BestModel {
  ModelId id;
  double distance;
};
// Lowest distance wins; ties go to the lowest id.
std::optional<BestModel> best_model(const Aggregate& agg, std::span<const AttackModel> models,
                                    const WeightConfig& weights);

enum class Admission { associate, create };

// sum_i w_i ln|Theta_i| - ln gamma
double admission_bound(const PerComponent<std::size_t>& sizes, const SynthConfig& config);
Admission admit(double distance, const PerComponent<std::size_t>& sizes, const SynthConfig& config);

AttackModel create_model(const Aggregate& agg, Timestamp now, ModelId id, const PerComponent<std::size_t>& sizes,
                         const SynthConfig& config);
void update_model(AttackModel& model, const Aggregate& agg, Timestamp now, const SynthConfig& config);

// Weighted sum over components of the JSD of the smoothed pmfs.
double model_jsd(const AttackModel& a, const AttackModel& b, const WeightConfig& weights);

struct MergeRecord {
  ModelId absorbed;
  ModelId into;
  double jsd;
  Timestamp ts;
};

// Folds `smaller` into `larger` after decaying both to `now`.
void merge_models(AttackModel& larger, AttackModel smaller, Timestamp now, const SynthConfig& config);

// Repeatedly merges the closest pair while its JSD is below the threshold.
// The smaller-evidence model folds into the larger, which keeps its id.
std::vector<MergeRecord> merge_pass(std::vector<AttackModel>& models, Timestamp now, const SynthConfig& config);

// Removes models whose decayed evidence is below the floor and that have not
// been updated for a full window. Returns the removed models, decayed to now.
std::vector<AttackModel> retire_pass(std::vector<AttackModel>& models, Timestamp now, const SynthConfig& config);

using LabelFn = std::function<std::string(Component, std::uint32_t)>;

// Per component, the value that is prominent in the model and rare in every
// other model: argmax p(x) * -ln max_{other} smoothed_other(x) over the
// model's support. With a single model this is the mode. Ties go to the
// lexicographically first label.
PerComponent<std::uint32_t> characteristic_features(const AttackModel& model, std::span<const AttackModel> models,
                                                    const LabelFn& label);

struct AbsorbOutcome {
  ModelId model = 0;
  bool created = false;
  double distance = 0;  // +inf when the set was empty
  std::vector<MergeRecord> merges;
  std::vector<AttackModel> retired;
};

struct ModelSetStats {
  std::uint64_t aggregates = 0;
  std::uint64_t actions = 0;
  std::uint64_t created = 0;
  std::uint64_t merged = 0;
  std::uint64_t retired = 0;
  std::uint64_t merge_passes = 0;
  // merges performed in one pass -> number of passes
  std::map<std::size_t, std::uint64_t> merges_per_pass;
};

// Owns the evolving model set: admission, EWMA update, merging and
// retirement, with a cached pairwise JSD table.
class ModelSet {
 public:
  ModelSet(SynthConfig config, PerComponent<std::size_t> sizes);

  AbsorbOutcome absorb(const Aggregate& agg, Timestamp now);
  std::vector<AttackModel> retire(Timestamp now);

  // Ascending by id.
  const std::vector<AttackModel>& models() const { return models_; }
  const AttackModel* find(ModelId id) const;
  // Follows the merge genealogy to the model that now holds `id`'s evidence.
  ModelId resolve(ModelId id) const;

  const SynthConfig& config() const { return config_; }
  const PerComponent<std::size_t>& sizes() const { return sizes_; }
  const ModelSetStats& stats() const { return stats_; }

 private:
  std::size_t index_of(ModelId id) const;
  void refresh_row(const AttackModel& m);
  void drop_rows(ModelId id);
  std::vector<MergeRecord> run_merges(Timestamp now);

  SynthConfig config_;
  PerComponent<std::size_t> sizes_;
  std::vector<AttackModel> models_;
  ModelId next_id_ = 1;
  std::map<std::pair<ModelId, ModelId>, double> jsd_;
  std::unordered_map<ModelId, ModelId> merged_into_;
  ModelSetStats stats_;
};

}  // namespace alertsynth
