#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "alertsynth/aggregation.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace alertsynth;
using namespace std::chrono_literals;

namespace {

std::vector<Action> random_actions(std::mt19937_64& rng, std::size_t n, const PerComponent<std::size_t>& sizes) {
  std::vector<Action> out;
  for (std::size_t i = 0; i < n; ++i) {
    // Few distinct values so that repeats are common.
    auto pick = [&](std::size_t size) { return static_cast<std::uint32_t>(rng() % std::min<std::size_t>(size, 4)); };
    out.push_back(fixtures::action(pick(sizes[0]), pick(sizes[1]), pick(sizes[2]), pick(sizes[3]),
                                   static_cast<double>(i)));
  }
  return out;
}

std::vector<double> gap_times(const std::vector<double>& gaps) {
  std::vector<double> t{0.0};
  for (double g : gaps) t.push_back(t.back() + g);
  return t;
}

// Splits at each oracle cut bin: an action starts an aggregate when its bin is
// the first one at or past a cut.
std::vector<std::size_t> starts_from_cuts(const std::vector<std::int64_t>& bins, const std::vector<std::int64_t>& cuts) {
  std::vector<std::size_t> starts{0};
  std::size_t c = 0;
  for (std::size_t i = 1; i < bins.size(); ++i) {
    bool crossed = false;
    while (c < cuts.size() && cuts[c] <= bins[i]) {
      if (bins[i - 1] < cuts[c]) crossed = true;
      ++c;
    }
    if (crossed) starts.push_back(i);
  }
  return starts;
}

std::vector<std::int64_t> bins_of(const std::vector<Action>& actions, Duration width) {
  std::vector<std::int64_t> out;
  for (const auto& a : actions) out.push_back(epoch_micros(a.ts) / width.count());
  return out;
}

// Drives a live segmenter with interleaved advance() calls and returns the
// start index of every closed batch.
std::vector<std::size_t> online_starts(SegmenterConfig cfg, const std::vector<Action>& actions, std::mt19937_64& rng) {
  auto seg = make_segmenter(cfg);
  std::vector<ActionBatch> closed;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (i > 0 && rng() % 3 == 0) {
      const auto lo = epoch_micros(actions[i - 1].ts);
      const auto hi = epoch_micros(actions[i].ts);
      if (hi > lo) seg->advance(from_epoch_micros(lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo))), closed);
    }
    seg->push(actions[i], closed);
  }
  seg->flush(closed);
  EXPECT_TRUE(seg->empty());
  std::vector<std::size_t> starts;
  std::size_t offset = 0;
  for (const auto& b : closed) {
    starts.push_back(offset);
    for (const auto& a : b) EXPECT_EQ(a.raw_seq, offset++);
  }
  EXPECT_EQ(offset, actions.size());
  return starts;
}

void expect_partition(const std::vector<std::size_t>& starts, std::size_t n) {
  ASSERT_FALSE(starts.empty());
  EXPECT_EQ(starts.front(), 0u);
  for (std::size_t i = 1; i < starts.size(); ++i) EXPECT_LT(starts[i - 1], starts[i]);
  EXPECT_LT(starts.back(), n);
}

}  // namespace

TEST(BuildAggregate, ExamplesFromCounting) {
  std::vector<Action> acts{fixtures::action(8, 0, 0, 0, 0), fixtures::action(8, 0, 0, 1, 5)};
  auto agg = build_aggregate(acts);
  EXPECT_EQ(agg.n, 2u);
  EXPECT_DOUBLE_EQ(agg.pmfs[0].at(8), 1.0);
  EXPECT_EQ(agg.t_start, fixtures::at(0));
  EXPECT_EQ(agg.t_end, fixtures::at(5));

  auto svc = build_aggregate({fixtures::action(0, 3, 0, 0), fixtures::action(0, 3, 0, 0), fixtures::action(0, 1, 0, 0)});
  EXPECT_NEAR(svc.pmfs[1].at(3), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(svc.pmfs[1].at(1), 1.0 / 3.0, 1e-15);

  std::vector<Action> four;
  for (std::uint32_t b = 0; b < 4; ++b) four.push_back(fixtures::action(0, 0, 0, b));
  auto t = build_aggregate(four);
  for (std::uint32_t b = 0; b < 4; ++b) EXPECT_DOUBLE_EQ(t.pmfs[3].at(b), 0.25);
}

TEST(BuildAggregate, EmptyIsAContractViolation) {
  EXPECT_THROW(build_aggregate({}), ContractViolation);
}

TEST(BuildAggregate, MatchesBruteForceCounting) {
  const PerComponent<std::size_t> sizes{12, 40, kManeuvers, kTimeBins};
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    auto acts = random_actions(rng, 1 + rng() % 30, sizes);
    auto agg = build_aggregate(acts);
    ASSERT_EQ(agg.n, acts.size());
    for (Component c : kAllComponents) {
      const auto i = static_cast<std::size_t>(c);
      const auto expected = oracle::pmf_by_counting(acts, c, sizes[i]);
      const auto got = agg.pmfs[i].dense(sizes[i]);
      for (std::size_t v = 0; v < sizes[i]; ++v) ASSERT_NEAR(got[v], expected[v], 1e-12);
      EXPECT_NEAR(agg.pmfs[i].sum(), 1.0, 1e-9);
      for (const auto& [v, p] : agg.pmfs[i].cells) EXPECT_GT(p, 0.0) << v;
    }
  }
}

TEST(SegmentThreshold, Examples) {
  auto acts = fixtures::actions_at(gap_times({2, 400, 3}));
  EXPECT_EQ(segment_threshold(acts, 300s), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(segment_threshold(fixtures::actions_at({0}), 300s), (std::vector<std::size_t>{0}));
  EXPECT_EQ(segment_threshold(fixtures::actions_at(gap_times({1, 299, 300})), 300s), (std::vector<std::size_t>{0}));
  EXPECT_TRUE(segment_threshold({}, 300s).empty());
}

TEST(SegmentThreshold, InAggregateGapsNeverExceedTau) {
  std::mt19937_64 rng(9);
  std::exponential_distribution<double> gap(1.0 / 400.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> gaps(1 + rng() % 80);
    for (auto& g : gaps) g = std::round(gap(rng));
    auto acts = fixtures::actions_at(gap_times(gaps));
    auto starts = segment_threshold(acts, 600s);
    expect_partition(starts, acts.size());
    std::size_t s = 1;
    for (std::size_t i = 1; i < acts.size(); ++i) {
      const bool boundary = s < starts.size() && starts[s] == i;
      if (boundary) ++s;
      EXPECT_EQ(boundary, acts[i].ts - acts[i - 1].ts > Duration(600s)) << i;
    }
  }
}

TEST(SegmentGaussian, TwoBurstsSplitAtTheOracleValley) {
  std::vector<double> t;
  for (int i = 0; i < 20; ++i) t.push_back(i * 0.5);
  for (int i = 0; i < 20; ++i) t.push_back(1000 + i * 0.5);
  auto acts = fixtures::actions_at(t);
  const auto cuts = oracle::gaussian_cuts(bins_of(acts, 60s), 3.0, 0.5);
  ASSERT_EQ(cuts.size(), 1u);
  const auto expected = starts_from_cuts(bins_of(acts, 60s), cuts);
  EXPECT_EQ(expected, (std::vector<std::size_t>{0, 20}));
  EXPECT_EQ(segment_gaussian(acts, 60s, 3.0, 0.5), expected);
}

TEST(SegmentGaussian, UniformRateIsOneEpisode) {
  std::vector<double> t;
  for (int i = 0; i < 240; ++i) t.push_back(i * 30.0);
  auto acts = fixtures::actions_at(t);
  EXPECT_TRUE(oracle::gaussian_cuts(bins_of(acts, 60s), 3.0, 0.5).empty());
  EXPECT_EQ(segment_gaussian(acts, 60s, 3.0, 0.5), (std::vector<std::size_t>{0}));
  EXPECT_EQ(segment_gaussian(fixtures::actions_at({5}), 60s, 3.0, 0.5), (std::vector<std::size_t>{0}));
}

TEST(SegmentGaussian, UniformRateIsCappedByTheFlushWindow) {
  SegmenterConfig cfg;
  cfg.kind = SegmenterKind::gaussian;
  cfg.max_span = 1h;
  std::vector<double> t;
  for (int i = 0; i < 300; ++i) t.push_back(i * 30.0);  // 2.5h
  auto acts = fixtures::actions_at(t);
  auto seg = make_segmenter(cfg);
  std::vector<ActionBatch> closed;
  for (const auto& a : acts) seg->push(a, closed);
  seg->flush(closed);
  ASSERT_EQ(closed.size(), 3u);
  for (const auto& b : closed) EXPECT_LE(b.back().ts - b.front().ts, Duration(1h));
}

TEST(SegmentGaussian, MatchesOracleOnRandomBursts) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> t;
    double clock = 0;
    const int bursts = 1 + static_cast<int>(rng() % 4);
    for (int b = 0; b < bursts; ++b) {
      clock += std::uniform_real_distribution<double>(0, 3000)(rng);
      const int n = 1 + static_cast<int>(rng() % 25);
      for (int i = 0; i < n; ++i) {
        clock += std::uniform_real_distribution<double>(0, 90)(rng);
        t.push_back(std::floor(clock));
      }
    }
    auto acts = fixtures::actions_at(t);
    const auto bins = bins_of(acts, 60s);
    const auto expected = starts_from_cuts(bins, oracle::gaussian_cuts(bins, 3.0, 0.5));
    ASSERT_EQ(segment_gaussian(acts, 60s, 3.0, 0.5), expected) << "trial " << trial;
  }
}

TEST(SegmentControlChart, FindsTheRateChange) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> jitter(0.8, 1.2);
  std::vector<double> gaps;
  for (int i = 0; i < 100; ++i) gaps.push_back(jitter(rng));
  for (int i = 0; i < 60; ++i) gaps.push_back(1000 * jitter(rng));
  auto acts = fixtures::actions_at(gap_times(gaps));

  // Offline change point: the split of the log gaps minimizing within-segment
  // squared error.
  std::vector<double> lg;
  for (double g : gaps) lg.push_back(std::log10(g));
  std::size_t best_k = 1;
  double best = INFINITY;
  for (std::size_t k = 1; k < lg.size(); ++k) {
    auto sse = [&](std::size_t lo, std::size_t hi) {
      double m = 0;
      for (auto i = lo; i < hi; ++i) m += lg[i];
      m /= static_cast<double>(hi - lo);
      double s = 0;
      for (auto i = lo; i < hi; ++i) s += (lg[i] - m) * (lg[i] - m);
      return s;
    };
    const double total = sse(0, k) + sse(k, lg.size());
    if (total < best) best = total, best_k = k;
  }
  ASSERT_EQ(best_k, 100u);

  const auto starts = segment_controlchart(acts, 20, 0.01);
  ASSERT_GE(starts.size(), 2u);
  // Gap k ends at action k + 1.
  const auto gap_index = static_cast<std::int64_t>(starts[1]) - 1;
  EXPECT_GE(gap_index, static_cast<std::int64_t>(best_k));
  EXPECT_LE(gap_index, static_cast<std::int64_t>(best_k) + 20);
}

TEST(SegmentControlChart, FalseAlarmRateWithinAlpha) {
  const double alpha = 0.01;
  int alarms = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> gap(1.0 / 30.0);
    std::vector<double> gaps(200);
    for (auto& g : gaps) g = gap(rng);
    if (segment_controlchart(fixtures::actions_at(gap_times(gaps)), 20, alpha).size() > 1) ++alarms;
  }
  EXPECT_LE(alarms / 1000.0, alpha);
}

TEST(SegmentControlChart, ShortStreamsNeverSplit) {
  std::vector<double> gaps(18, 1.0);
  gaps.push_back(100000.0);
  EXPECT_EQ(segment_controlchart(fixtures::actions_at(gap_times(gaps)), 20, 0.01), (std::vector<std::size_t>{0}));
}

TEST(KsStatistic, MatchesBruteForce) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> a(1 + rng() % 30), b(1 + rng() % 30);
    // Coarse values force ties.
    for (auto& v : a) v = static_cast<double>(rng() % 10);
    for (auto& v : b) v = static_cast<double>(rng() % 12) - 1;
    ASSERT_NEAR(ks_statistic(a, b), oracle::ks(a, b), 1e-12);
  }
  EXPECT_NEAR(ks_critical_value(0.01, 20, 80), std::sqrt(-0.5 * std::log(0.005)) * std::sqrt(100.0 / 1600.0), 1e-12);
}

TEST(GaussianKernel, UnitSumAndTruncated) {
  auto k = gaussian_half_kernel(3.0);
  EXPECT_EQ(k.size(), 13u);
  double s = k[0];
  for (std::size_t i = 1; i < k.size(); ++i) s += 2 * k[i];
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Segmenters, OnlineMatchesOffline) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<double> t;
    double clock = 0;
    for (int i = 0, n = 1 + static_cast<int>(rng() % 120); i < n; ++i) {
      clock += rng() % 4 == 0 ? std::uniform_real_distribution<double>(0, 4000)(rng)
                              : std::uniform_real_distribution<double>(0, 60)(rng);
      t.push_back(std::floor(clock));
    }
    auto acts = fixtures::actions_at(t);
    for (SegmenterKind kind : {SegmenterKind::threshold, SegmenterKind::gaussian, SegmenterKind::controlchart}) {
      SegmenterConfig cfg;
      cfg.kind = kind;
      cfg.max_span = Duration::zero();
      const auto online = online_starts(cfg, acts, rng);
      expect_partition(online, acts.size());
      std::vector<std::size_t> offline;
      switch (kind) {
        case SegmenterKind::threshold: offline = segment_threshold(acts, cfg.tau); break;
        case SegmenterKind::gaussian: offline = segment_gaussian(acts, cfg.bin_width, cfg.sigma_bins, cfg.valley_frac); break;
        case SegmenterKind::controlchart: offline = segment_controlchart(acts, cfg.window_n, cfg.ks_alpha); break;
      }
      ASSERT_EQ(online, offline) << segmenter_name(kind) << " trial " << trial;
    }
  }
}

TEST(Segmenters, DeadlineBoundsAdvance) {
  // advance() before the deadline never closes anything.
  for (SegmenterKind kind : {SegmenterKind::threshold, SegmenterKind::gaussian, SegmenterKind::controlchart}) {
    SegmenterConfig cfg;
    cfg.kind = kind;
    cfg.max_span = 1h;
    auto seg = make_segmenter(cfg);
    std::vector<ActionBatch> closed;
    seg->push(fixtures::action(0, 0, 0, 0, 0), closed);
    const auto d = seg->deadline();
    ASSERT_TRUE(d) << segmenter_name(kind);
    seg->advance(*d, closed);
    EXPECT_TRUE(closed.empty()) << segmenter_name(kind);
    seg->advance(*d + Duration(1), closed);
    EXPECT_EQ(closed.size(), 1u) << segmenter_name(kind);
    EXPECT_TRUE(seg->empty());
    EXPECT_FALSE(seg->deadline());
  }
}

TEST(ParseSegmenter, Names) {
  EXPECT_EQ(parse_segmenter("Gaussian"), SegmenterKind::gaussian);
  EXPECT_EQ(parse_segmenter("control_chart"), SegmenterKind::controlchart);
  EXPECT_FALSE(parse_segmenter("kmeans"));
  EXPECT_EQ(segmenter_name(SegmenterKind::threshold), "threshold");
}
