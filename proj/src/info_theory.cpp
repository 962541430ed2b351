#include "alertsynth/info_theory.hpp"

#include <cmath>

#include "alertsynth/common.hpp"

namespace alertsynth {

std::vector<double> smoothed_pmf(std::span<const double> counts, double eps) {
  require(eps >= 0 && eps < 1, "smoothed_pmf: eps must be in [0,1)");
  double total = 0;
  for (double c : counts) {
    require(c >= 0, "smoothed_pmf: negative count");
    total += c;
  }
  require(total > 0, "smoothed_pmf: all-zero counts");

  std::vector<double> p(counts.size());
  double mass = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    p[i] = std::max(counts[i] / total, eps);
    mass += p[i];
  }
  for (double& v : p) v /= mass;
  return p;
}

double cross_entropy(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size(), "cross_entropy: dimension mismatch");
  double h = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0) h -= p[i] * std::log(q[i]);
  }
  return h;
}

double cross_entropy(const SparsePmf& p, std::span<const double> q) {
  double h = 0;
  for (const auto& [i, pi] : p.cells) {
    require(i < q.size(), "cross_entropy: dimension mismatch");
    h -= pi * std::log(q[i]);
  }
  return h;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size(), "kl_divergence: dimension mismatch");
  double d = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0) d += p[i] * std::log(p[i] / q[i]);
  }
  return d;
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size(), "js_divergence: dimension mismatch");
  double d = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0) d += 0.5 * p[i] * std::log(p[i] / m);
    if (q[i] > 0) d += 0.5 * q[i] * std::log(q[i] / m);
  }
  return d;
}

double entropy(std::span<const double> p) {
  double h = 0;
  for (double v : p) {
    if (v > 0) h -= v * std::log(v);
  }
  return h;
}

}  // namespace alertsynth
