#include "alertsynth/aggregation.hpp"

#include <algorithm>
#include <cmath>

namespace alertsynth {

double SparsePmf::at(std::uint32_t index) const {
  auto it = std::lower_bound(cells.begin(), cells.end(), index,
                             [](const auto& cell, std::uint32_t i) { return cell.first < i; });
  return it != cells.end() && it->first == index ? it->second : 0.0;
}

double SparsePmf::sum() const {
  double s = 0;
  for (const auto& [_, p] : cells) s += p;
  return s;
}

std::vector<double> SparsePmf::dense(std::size_t size) const {
  std::vector<double> out(size, 0.0);
  for (const auto& [i, p] : cells) out.at(i) = p;
  return out;
}

Aggregate build_aggregate(std::vector<Action> actions) {
  require(!actions.empty(), "build_aggregate: empty action list");
  Aggregate agg;
  agg.n = actions.size();
  agg.stream_id = actions.front().stream_id;
  agg.t_start = actions.front().ts;
  agg.t_end = actions.front().ts;
  for (const auto& a : actions) {
    agg.t_start = std::min(agg.t_start, a.ts);
    agg.t_end = std::max(agg.t_end, a.ts);
  }

  const double inv_n = 1.0 / static_cast<double>(agg.n);
  std::vector<std::uint32_t> values(agg.n);
  for (Component c : kAllComponents) {
    for (std::size_t i = 0; i < agg.n; ++i) values[i] = actions[i].value(c);
    std::sort(values.begin(), values.end());
    auto& cells = agg.pmfs[static_cast<std::size_t>(c)].cells;
    for (std::size_t i = 0; i < values.size();) {
      std::size_t j = i;
      while (j < values.size() && values[j] == values[i]) ++j;
      cells.emplace_back(values[i], static_cast<double>(j - i) * inv_n);
      i = j;
    }
  }
  agg.actions = std::move(actions);
  return agg;
}

std::string_view segmenter_name(SegmenterKind k) {
  switch (k) {
    case SegmenterKind::threshold:
      return "threshold";
    case SegmenterKind::gaussian:
      return "gaussian";
    case SegmenterKind::controlchart:
      return "controlchart";
  }
  return "?";
}

std::optional<SegmenterKind> parse_segmenter(std::string_view text) {
  const auto t = to_lower(trim(text));
  if (t == "threshold") return SegmenterKind::threshold;
  if (t == "gaussian") return SegmenterKind::gaussian;
  if (t == "controlchart" || t == "control_chart") return SegmenterKind::controlchart;
  return std::nullopt;
}

double ks_statistic(std::span<const double> a, std::span<const double> b) {
  require(!a.empty() && !b.empty(), "ks_statistic: empty sample");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }
  return d;
}

double ks_critical_value(double alpha, std::size_t n, std::size_t m) {
  require(alpha > 0 && alpha < 1, "ks_critical_value: alpha must be in (0,1)");
  require(n > 0 && m > 0, "ks_critical_value: empty sample");
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  const double nn = static_cast<double>(n);
  const double mm = static_cast<double>(m);
  return c * std::sqrt((nn + mm) / (nn * mm));
}

std::vector<double> gaussian_half_kernel(double sigma_bins) {
  require(sigma_bins > 0, "gaussian kernel: sigma must be positive");
  const auto k_max = static_cast<std::size_t>(std::ceil(4.0 * sigma_bins));
  std::vector<double> w(k_max + 1);
  double total = 0;
  for (std::size_t k = 0; k <= k_max; ++k) {
    const double x = static_cast<double>(k);
    w[k] = std::exp(-x * x / (2.0 * sigma_bins * sigma_bins));
    total += k == 0 ? w[k] : 2.0 * w[k];
  }
  for (double& v : w) v /= total;
  return w;
}

namespace {

bool exceeds_span(Duration max_span, Timestamp first, Timestamp now) {
  return max_span > Duration::zero() && now - first > max_span;
}

class ThresholdSegmenter final : public Segmenter {
 public:
  explicit ThresholdSegmenter(const SegmenterConfig& cfg) : tau_(cfg.tau), max_span_(cfg.max_span) {}

  void push(const Action& a, std::vector<ActionBatch>& closed) override {
    if (!pending_.empty() && (a.ts - last_ts_ > tau_ || exceeds_span(max_span_, pending_.front().ts, a.ts))) {
      close(closed);
    }
    last_ts_ = pending_.empty() ? a.ts : std::max(last_ts_, a.ts);
    pending_.push_back(a);
  }

  void advance(Timestamp now, std::vector<ActionBatch>& closed) override {
    if (!pending_.empty() && (now - last_ts_ > tau_ || exceeds_span(max_span_, pending_.front().ts, now))) {
      close(closed);
    }
  }

  void flush(std::vector<ActionBatch>& closed) override {
    if (!pending_.empty()) close(closed);
  }

  std::optional<Timestamp> deadline() const override {
    if (pending_.empty()) return std::nullopt;
    Timestamp d = last_ts_ + tau_;
    if (max_span_ > Duration::zero()) d = std::min(d, pending_.front().ts + max_span_);
    return d;
  }

  bool empty() const override { return pending_.empty(); }

 private:
  void close(std::vector<ActionBatch>& closed) {
    closed.push_back(std::move(pending_));
    pending_.clear();
  }

  Duration tau_;
  Duration max_span_;
  Timestamp last_ts_;
  ActionBatch pending_;
};

// Histograms the stream into bins, smooths with a truncated Gaussian and cuts
// episodes at deep valleys. Only bins whose smoothed value can no longer
// change are used for decisions, so online and offline cuts agree.
class GaussianSegmenter final : public Segmenter {
 public:
  explicit GaussianSegmenter(const SegmenterConfig& cfg)
      : bin_us_(cfg.bin_width.count()),
        valley_frac_(cfg.valley_frac),
        max_span_(cfg.max_span),
        kernel_(gaussian_half_kernel(cfg.sigma_bins)),
        reach_(static_cast<std::int64_t>(kernel_.size()) - 1) {
    require(bin_us_ > 0, "gaussian segmenter: bin width must be positive");
    require(valley_frac_ > 0, "gaussian segmenter: valley fraction must be positive");
  }

  void push(const Action& a, std::vector<ActionBatch>& closed) override {
    force_flush(a.ts, closed);
    const Timestamp ts = pending_.empty() && counts_.empty() ? a.ts : std::max(a.ts, last_ts_);
    const std::int64_t b = bin_of(ts);
    if (counts_.empty()) {
      boundary_ = b;
      origin_ = b - reach_ - 1;
      last_bin_ = b;
    }
    const bool new_bin = b > last_bin_;
    while (origin_ + static_cast<std::int64_t>(counts_.size()) <= b) counts_.push_back(0.0);
    counts_[static_cast<std::size_t>(b - origin_)] += 1.0;
    last_bin_ = std::max(last_bin_, b);
    last_ts_ = ts;
    pending_.emplace_back(b, a);
    if (new_bin) evaluate(b - reach_, false, closed);
  }

  void advance(Timestamp now, std::vector<ActionBatch>& closed) override {
    force_flush(now, closed);
    if (pending_.empty()) return;
    const std::int64_t b = bin_of(now);
    if (b > last_bin_ + 2 * reach_ + 1) {
      flush(closed);
      return;
    }
    evaluate(b - reach_, false, closed);
  }

  void flush(std::vector<ActionBatch>& closed) override {
    if (!pending_.empty()) {
      evaluate(last_bin_ + reach_ + 2, true, closed);
      emit_before(last_bin_ + 1, closed);
    }
    counts_.clear();
  }

  std::optional<Timestamp> deadline() const override {
    if (pending_.empty()) return std::nullopt;
    // advance() flushes once now reaches bin last_bin + 2K + 2.
    Timestamp d = from_epoch_micros((last_bin_ + 2 * reach_ + 2) * bin_us_) - Duration(1);
    if (max_span_ > Duration::zero()) d = std::min(d, pending_.front().second.ts + max_span_);
    return d;
  }

  bool empty() const override { return pending_.empty(); }

 private:
  std::int64_t bin_of(Timestamp t) const {
    const auto us = epoch_micros(t);
    return us >= 0 ? us / bin_us_ : -((-us + bin_us_ - 1) / bin_us_);
  }

  double count_at(std::int64_t b) const {
    const auto i = b - origin_;
    if (i < 0 || i >= static_cast<std::int64_t>(counts_.size())) return 0.0;
    return counts_[static_cast<std::size_t>(i)];
  }

  double smoothed_at(std::int64_t b) const {
    double s = kernel_[0] * count_at(b);
    for (std::int64_t k = 1; k <= reach_; ++k) {
      s += kernel_[static_cast<std::size_t>(k)] * (count_at(b - k) + count_at(b + k));
    }
    return s;
  }

  // Bins below `settled` have final smoothed values. With `final_pass` every
  // bin is final.
  void evaluate(std::int64_t settled, bool final_pass, std::vector<ActionBatch>& closed) {
    const std::int64_t lo = boundary_ - 1;
    if (settled - lo < 3) return;
    std::vector<double> s(static_cast<std::size_t>(settled - lo));
    for (std::int64_t b = lo; b < settled; ++b) s[static_cast<std::size_t>(b - lo)] = smoothed_at(b);
    auto sv = [&](std::int64_t b) { return s[static_cast<std::size_t>(b - lo)]; };
    auto is_candidate = [&](std::int64_t m) { return sv(m - 1) >= sv(m) && sv(m) < sv(m + 1); };

    std::int64_t prev = boundary_;
    double left_max = 0;
    std::int64_t scanned = prev;  // left_max covers [prev, scanned)
    for (std::int64_t m = prev + 1; m + 1 < settled; ++m) {
      if (!is_candidate(m)) continue;
      for (; scanned < m; ++scanned) left_max = std::max(left_max, sv(scanned));
      std::int64_t next = m + 1;
      while (next + 1 < settled && !is_candidate(next)) ++next;
      const bool bounded = next + 1 < settled;
      double right_max = 0;
      for (std::int64_t b = m + 1; b < (bounded ? next : settled); ++b) right_max = std::max(right_max, sv(b));

      if (sv(m) < valley_frac_ * std::min(left_max, right_max)) {
        emit_before(m, closed);
        prev = m;
        left_max = 0;
        scanned = m;
      } else if (!bounded && !final_pass) {
        break;  // the right peak may still grow
      }
    }
    boundary_ = prev;
    trim();
  }

  void emit_before(std::int64_t bin, std::vector<ActionBatch>& closed) {
    // Out-of-order actions are counted in the bin of the latest action seen,
    // so pending_ is ordered by bin.
    ActionBatch batch;
    while (!pending_.empty() && pending_.front().first < bin) {
      batch.push_back(pending_.front().second);
      pending_.pop_front();
    }
    if (!batch.empty()) closed.push_back(std::move(batch));
  }

  // Once the open episode spans more than max_span, everything pending
  // closes as one aggregate and the histogram starts over.
  void force_flush(Timestamp now, std::vector<ActionBatch>& closed) {
    if (pending_.empty() || !exceeds_span(max_span_, pending_.front().second.ts, now)) return;
    ActionBatch batch;
    for (auto& [bin, action] : pending_) batch.push_back(std::move(action));
    pending_.clear();
    counts_.clear();
    closed.push_back(std::move(batch));
  }

  void trim() {
    while (!counts_.empty() && origin_ < boundary_ - reach_ - 1) {
      counts_.pop_front();
      ++origin_;
    }
  }

  std::int64_t bin_us_;
  double valley_frac_;
  Duration max_span_;
  std::vector<double> kernel_;
  std::int64_t reach_;
  std::deque<std::pair<std::int64_t, Action>> pending_;  // (counted bin, action)
  std::deque<double> counts_;
  std::int64_t origin_ = 0;
  std::int64_t boundary_ = 0;
  std::int64_t last_bin_ = 0;
  Timestamp last_ts_;
};

// Control chart on log10 inter-arrival gaps; a 3-sigma excursion triggers a
// KS test of the recent window against the rest of the open aggregate.
class ControlChartSegmenter final : public Segmenter {
 public:
  explicit ControlChartSegmenter(const SegmenterConfig& cfg)
      : window_n_(cfg.window_n), alpha_(cfg.ks_alpha), max_span_(cfg.max_span) {
    require(window_n_ >= 1, "control chart: window_n must be >= 1");
  }

  void push(const Action& a, std::vector<ActionBatch>& closed) override {
    if (pending_.empty()) {
      start(a);
      return;
    }
    if (exceeds_span(max_span_, pending_.front().ts, a.ts)) {
      close(closed);
      start(a);
      return;
    }
    const double gap_s = std::max(to_seconds(a.ts - last_ts_), 0.0);
    const double lg = std::log10(std::max(gap_s, kMinGapSeconds));
    if (gaps_.size() >= window_n_ && lg > mean_ + 3.0 * stddev()) {
      std::vector<double> window(gaps_.end() - static_cast<std::ptrdiff_t>(window_n_ - 1), gaps_.end());
      window.push_back(lg);
      const std::span<const double> earlier(gaps_.data(), gaps_.size() - (window_n_ - 1));
      if (ks_statistic(window, earlier) > ks_critical_value(alpha_, window.size(), earlier.size())) {
        close(closed);
        start(a);
        return;
      }
    }
    gaps_.push_back(lg);
    const double delta = lg - mean_;
    mean_ += delta / static_cast<double>(gaps_.size());
    m2_ += delta * (lg - mean_);
    last_ts_ = std::max(last_ts_, a.ts);
    pending_.push_back(a);
  }

  void advance(Timestamp now, std::vector<ActionBatch>& closed) override {
    if (!pending_.empty() && exceeds_span(max_span_, pending_.front().ts, now)) close(closed);
  }

  void flush(std::vector<ActionBatch>& closed) override {
    if (!pending_.empty()) close(closed);
  }

  std::optional<Timestamp> deadline() const override {
    if (pending_.empty() || max_span_ <= Duration::zero()) return std::nullopt;
    return pending_.front().ts + max_span_;
  }

  bool empty() const override { return pending_.empty(); }

 private:
  static constexpr double kMinGapSeconds = 1e-6;

  double stddev() const {
    return gaps_.size() > 1 ? std::sqrt(m2_ / static_cast<double>(gaps_.size() - 1)) : 0.0;
  }

  void start(const Action& a) {
    pending_.push_back(a);
    last_ts_ = a.ts;
  }

  void close(std::vector<ActionBatch>& closed) {
    closed.push_back(std::move(pending_));
    pending_.clear();
    gaps_.clear();
    mean_ = 0;
    m2_ = 0;
  }

  std::size_t window_n_;
  double alpha_;
  Duration max_span_;
  ActionBatch pending_;
  std::vector<double> gaps_;
  double mean_ = 0;
  double m2_ = 0;
  Timestamp last_ts_;
};

std::vector<std::size_t> boundaries_of(Segmenter& seg, std::span<const Action> actions) {
  std::vector<ActionBatch> closed;
  for (const auto& a : actions) seg.push(a, closed);
  seg.flush(closed);
  std::vector<std::size_t> starts;
  std::size_t offset = 0;
  for (const auto& batch : closed) {
    starts.push_back(offset);
    offset += batch.size();
  }
  return starts;
}

}  // namespace

std::unique_ptr<Segmenter> make_segmenter(const SegmenterConfig& config) {
  switch (config.kind) {
    case SegmenterKind::gaussian:
      return std::make_unique<GaussianSegmenter>(config);
    case SegmenterKind::controlchart:
      return std::make_unique<ControlChartSegmenter>(config);
    case SegmenterKind::threshold:
      break;
  }
  return std::make_unique<ThresholdSegmenter>(config);
}

std::vector<std::size_t> segment_threshold(std::span<const Action> actions, Duration tau) {
  SegmenterConfig cfg;
  cfg.tau = tau;
  cfg.max_span = Duration::zero();
  ThresholdSegmenter seg(cfg);
  return boundaries_of(seg, actions);
}

std::vector<std::size_t> segment_gaussian(std::span<const Action> actions, Duration bin_width, double sigma_bins,
                                          double valley_frac) {
  SegmenterConfig cfg;
  cfg.bin_width = bin_width;
  cfg.sigma_bins = sigma_bins;
  cfg.valley_frac = valley_frac;
  cfg.max_span = Duration::zero();
  GaussianSegmenter seg(cfg);
  return boundaries_of(seg, actions);
}

std::vector<std::size_t> segment_controlchart(std::span<const Action> actions, std::size_t window_n,
                                              double ks_alpha) {
  SegmenterConfig cfg;
  cfg.window_n = window_n;
  cfg.ks_alpha = ks_alpha;
  cfg.max_span = Duration::zero();
  ControlChartSegmenter seg(cfg);
  return boundaries_of(seg, actions);
}

}  // namespace alertsynth
