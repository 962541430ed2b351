#pragma once

#include <span>
#include <vector>

#include "alertsynth/aggregation.hpp"

namespace alertsynth {

// All quantities are in nats.

// Normalizes counts and lifts every cell below eps to eps, then renormalizes.
// Requires nonnegative counts with positive sum.
std::vector<double> smoothed_pmf(std::span<const double> counts, double eps);

// H(p, q) = -sum p ln q, skipping cells where p is zero. q must be positive
// wherever p is.
double cross_entropy(std::span<const double> p, std::span<const double> q);
double cross_entropy(const SparsePmf& p, std::span<const double> q);

// D(p || q) = sum p ln(p / q) with 0 ln 0 = 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);

// Jensen-Shannon divergence of two pmfs against their average.
double js_divergence(std::span<const double> p, std::span<const double> q);

double entropy(std::span<const double> p);

}  // namespace alertsynth
