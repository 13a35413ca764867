#pragma once

#include "hkin/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

namespace hkin {

struct Survivor {
  std::size_t index;
  double weight;  // unnormalized, same scale as the input
};

/// Stratified optimal resampling down to `budget` particles.
///
/// With normalized weights w and threshold α solving Σ min(1, w/α) = budget, particles with
/// w ≥ α are kept with their weight; each of the others survives with probability w/α and
/// carries weight α. Inputs with at most `budget` particles are returned unchanged.
template <class Rng>
std::vector<Survivor> stratified_optimal_resample(std::span<const double> weights, std::size_t budget, Rng& rng) {
  if (budget < 1) throw InputError("resampling budget must be >= 1");
  std::vector<Survivor> out;
  if (weights.size() <= budget) {
    out.reserve(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) out.push_back({i, weights[i]});
    return out;
  }
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw InputError("resampling weights must be finite and >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw InputError("resampling needs at least one positive weight");

  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });

  // k largest particles kept outright; α spreads the remaining mass over budget - k slots
  std::size_t kept = 0;
  double rest = total;
  double alpha = rest / static_cast<double>(budget);
  while (kept < budget && weights[order[kept]] >= alpha) {
    rest -= weights[order[kept]];
    ++kept;
    if (kept == budget) break;
    alpha = rest / static_cast<double>(budget - kept);
  }
  std::vector<bool> chosen(weights.size(), false);
  for (std::size_t r = 0; r < kept; ++r) chosen[order[r]] = true;
  const std::size_t slots = budget - kept;

  std::vector<std::size_t> drawn;
  if (slots > 0 && alpha > 0.0) {
    std::uniform_real_distribution<double> unif(0.0, alpha);
    double u = unif(rng);
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (chosen[i]) continue;
      u -= weights[i];
      if (u < 0.0) {
        drawn.push_back(i);
        u += alpha;
      }
    }
    // rounding can leave the walk one slot off
    while (drawn.size() > slots) drawn.pop_back();
    if (drawn.size() < slots) {
      std::vector<bool> taken = chosen;
      for (std::size_t i : drawn) taken[i] = true;
      for (std::size_t r = kept; r < order.size() && drawn.size() < slots; ++r) {
        if (!taken[order[r]]) drawn.push_back(order[r]);
      }
    }
  }

  out.reserve(budget);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (chosen[i]) out.push_back({i, weights[i]});
  }
  for (std::size_t i : drawn) out.push_back({i, alpha});
  std::sort(out.begin(), out.end(), [](const Survivor& a, const Survivor& b) { return a.index < b.index; });
  return out;
}

inline std::vector<Survivor> stratified_optimal_resample(std::span<const double> weights, std::size_t budget,
                                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return stratified_optimal_resample(weights, budget, rng);
}

}  // namespace hkin
