#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "alertsynth/action_space.hpp"
#include "alertsynth/common.hpp"

namespace alertsynth {

// Probability mass on a few cells of a component; cells ascend by index.
struct SparsePmf {
  std::vector<std::pair<std::uint32_t, double>> cells;

  double at(std::uint32_t index) const;
  double sum() const;
  std::vector<double> dense(std::size_t size) const;
};

// A contiguous batch of actions from one stream with its per-component
// empirical pmfs.
struct Aggregate {
  std::vector<Action> actions;
  PerComponent<SparsePmf> pmfs;
  std::size_t n = 0;
  Timestamp t_start;
  Timestamp t_end;
  StreamId stream_id = 0;
};

// Requires a nonempty, single-stream action list.
Aggregate build_aggregate(std::vector<Action> actions);

enum class SegmenterKind { threshold, gaussian, controlchart };

std::string_view segmenter_name(SegmenterKind k);
std::optional<SegmenterKind> parse_segmenter(std::string_view text);

struct SegmenterConfig {
  SegmenterKind kind = SegmenterKind::threshold;
  Duration tau = std::chrono::seconds(600);
  Duration bin_width = std::chrono::seconds(60);
  double sigma_bins = 3.0;
  double valley_frac = 0.5;
  std::size_t window_n = 20;
  double ks_alpha = 0.01;
  // Open aggregates older than this are closed regardless of the segmenter.
  // Zero disables the cap.
  Duration max_span = std::chrono::hours(6);
};

using ActionBatch = std::vector<Action>;

// Per-stream segmentation state. Actions arrive in stream order; closed
// batches are appended to `closed` in time order.
class Segmenter {
 public:
  virtual ~Segmenter() = default;

  virtual void push(const Action& action, std::vector<ActionBatch>& closed) = 0;
  // Processing time has reached `now` with no new action on this stream.
  virtual void advance(Timestamp now, std::vector<ActionBatch>& closed) = 0;
  virtual void flush(std::vector<ActionBatch>& closed) = 0;
  // advance() can only close something once now passes this point.
  virtual std::optional<Timestamp> deadline() const = 0;
  virtual bool empty() const = 0;
};

std::unique_ptr<Segmenter> make_segmenter(const SegmenterConfig& config);

// Offline forms over one stream's actions. Each returns the indices at which
// a new aggregate starts; the first entry is 0 for nonempty input.
std::vector<std::size_t> segment_threshold(std::span<const Action> actions, Duration tau);
std::vector<std::size_t> segment_gaussian(std::span<const Action> actions, Duration bin_width, double sigma_bins,
                                          double valley_frac);
std::vector<std::size_t> segment_controlchart(std::span<const Action> actions, std::size_t window_n,
                                              double ks_alpha);

// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_statistic(std::span<const double> a, std::span<const double> b);
// Asymptotic critical value c(alpha) * sqrt((n + m) / (n m)).
double ks_critical_value(double alpha, std::size_t n, std::size_t m);

// Truncated (+-4 sigma), unit-sum Gaussian kernel; entry k is the weight at
// offset k from the centre, k = 0..K.
std::vector<double> gaussian_half_kernel(double sigma_bins);

}  // namespace alertsynth
