#pragma once

// The distribution transforms applied before each sampling step.
//
// Every transform reads a SortedDistribution and returns weights aligned with
// its ranks. Deterministic transforms are pure; stochastic ones draw from the
// caller's Rng and are reproducible given its seed and stream position.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "slab/dist.hpp"
#include "slab/error.hpp"
#include "slab/rng.hpp"
#include "slab/temp_solver.hpp"
#include "slab/transform_spec.hpp"

namespace slab {

namespace detail {

inline void require_top_k(std::size_t k, std::size_t vocab) {
  if (k < 1 || k > vocab) {
    fail(Errc::HyperparamOutOfRange,
         "K=" + std::to_string(k) + " outside [1, " + std::to_string(vocab) + "]");
  }
}

inline void require_temperature(double t) {
  if (!(t > 0.0 && t <= 1.0)) fail(Errc::HyperparamOutOfRange, "T must be in (0, 1]");
}

inline void require_entropy(double e, std::size_t vocab) {
  if (!(e > 0.0 && e <= std::log(static_cast<double>(vocab)))) {
    fail(Errc::HyperparamOutOfRange, "E must be in (0, ln|V|]");
  }
}

inline void require_rate(double r) {
  if (!(r > 0.0 && r <= 1.0)) fail(Errc::HyperparamOutOfRange, "R must be in (0, 1]");
}

// Keeps probs[i] where keep[i] and renormalizes; returns empty if nothing
// with positive mass survives.
template <typename Keep>
std::vector<double> renormalized(std::span<const double> probs, Keep keep) {
  std::vector<double> weights(probs.size(), 0.0);
  double kept = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (keep(i)) {
      weights[i] = probs[i];
      kept += probs[i];
    }
  }
  if (!(kept > 0.0)) return {};
  for (double& w : weights) w /= kept;
  return weights;
}

}  // namespace detail

inline TransformedDistribution apply_top_k(const SortedDistribution& dist, std::size_t k) {
  detail::require_top_k(k, dist.size());
  auto weights = detail::renormalized(dist.probs(), [k](std::size_t i) { return i < k; });
  return {std::move(weights), dist.shared_perm()};
}

/// Keeps rank i iff the mass of ranks before it is strictly below `mass`.
inline TransformedDistribution apply_nucleus(const SortedDistribution& dist, double mass) {
  if (!(mass > 0.0 && mass <= 1.0)) fail(Errc::HyperparamOutOfRange, "P must be in (0, 1]");
  const auto probs = dist.probs();
  std::size_t kept = 0;
  double prefix = 0.0;
  while (kept < probs.size() && prefix < mass) prefix += probs[kept++];
  auto weights = detail::renormalized(probs, [kept](std::size_t i) { return i < kept; });
  return {std::move(weights), dist.shared_perm()};
}

inline TransformedDistribution apply_tempered(const SortedDistribution& dist, double temperature) {
  detail::require_temperature(temperature);
  return temper(dist, temperature);
}

inline TransformedDistribution apply_tempered_top_k(const SortedDistribution& dist, std::size_t k,
                                                    double temperature) {
  detail::require_top_k(k, dist.size());
  detail::require_temperature(temperature);
  const auto probs = dist.probs();
  const double log_top = std::log(probs[0]);
  std::vector<double> weights(probs.size(), 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < k && probs[i] > 0.0; ++i) {
    weights[i] = std::exp((std::log(probs[i]) - log_top) / temperature);
    z += weights[i];
  }
  for (std::size_t i = 0; i < k; ++i) weights[i] /= z;
  return {std::move(weights), dist.shared_perm()};
}

/// Tempers to entropy `target`; the temperature may exceed 1, raising entropy.
inline TransformedDistribution apply_target_entropy(const SortedDistribution& dist,
                                                    double target) {
  detail::require_entropy(target, dist.size());
  if (std::abs(entropy(dist) - target) <= kEntropyTolerance) {
    return TransformedDistribution::identity(dist);
  }
  return temper(dist, solve_temperature(dist, target).t_star);
}

/// Like target entropy, but only ever sharpens: inputs at or below `ceiling`
/// pass through unchanged.
inline TransformedDistribution apply_max_entropy(const SortedDistribution& dist, double ceiling) {
  detail::require_entropy(ceiling, dist.size());
  if (entropy(dist) <= ceiling) return TransformedDistribution::identity(dist);
  return temper(dist, solve_temperature(dist, ceiling).t_star);
}

/// Renormalizes over the ranks with keep[i] != 0 (a fixed mask realization).
inline TransformedDistribution apply_mask(const SortedDistribution& dist,
                                          std::span<const std::uint8_t> keep) {
  if (keep.size() != dist.size()) fail(Errc::LengthMismatch, "mask length differs from |V|");
  auto weights = detail::renormalized(dist.probs(), [&](std::size_t i) { return keep[i] != 0; });
  if (weights.empty()) fail(Errc::InvalidArgument, "mask removes all probability mass");
  return {std::move(weights), dist.shared_perm()};
}

/// Drops each rank below the top independently with probability `rate`.
inline TransformedDistribution apply_random_mask(const SortedDistribution& dist, double rate,
                                                 Rng& rng) {
  detail::require_rate(rate);
  std::vector<std::uint8_t> keep(dist.size(), 1);
  for (std::size_t i = 1; i < keep.size(); ++i) keep[i] = rng.uniform() > rate;
  return apply_mask(dist, keep);
}

/// Random mask where the top rank may be dropped too. Realizations that keep
/// no positive mass are redrawn.
inline TransformedDistribution apply_random_mask_all(const SortedDistribution& dist, double rate,
                                                     Rng& rng) {
  detail::require_rate(rate);
  const auto probs = dist.probs();
  std::vector<std::uint8_t> keep(dist.size(), 0);
  for (;;) {
    bool any = false;
    for (std::size_t i = 0; i < keep.size(); ++i) {
      keep[i] = rng.uniform() > rate;
      any = any || (keep[i] && probs[i] > 0.0);
    }
    if (any) return apply_mask(dist, keep);
    if (rate >= 1.0) {
      // u > 1 never happens; only the top rank can carry the distribution.
      std::fill(keep.begin(), keep.end(), 0);
      keep[0] = 1;
      return apply_mask(dist, keep);
    }
  }
}

/// Uniform draw from the sorted k-simplex: normalized unit exponentials,
/// sorted descending.
inline std::vector<double> sample_sorted_simplex(std::size_t k, Rng& rng) {
  std::vector<double> noise(k);
  double total = 0.0;
  for (double& v : noise) {
    v = rng.exponential();
    total += v;
  }
  if (!(total > 0.0)) {
    std::fill(noise.begin(), noise.end(), 1.0);
    total = static_cast<double>(k);
  }
  for (double& v : noise) v /= total;
  std::sort(noise.begin(), noise.end(), std::greater<>());
  return noise;
}

/// Mixes the top-k distribution with a given descending noise vector.
inline TransformedDistribution apply_noised_top_k(const SortedDistribution& dist, std::size_t k,
                                                  double noise_weight,
                                                  std::span<const double> noise) {
  detail::require_top_k(k, dist.size());
  if (!(noise_weight >= 0.0 && noise_weight <= 1.0)) {
    fail(Errc::HyperparamOutOfRange, "W must be in [0, 1]");
  }
  if (noise.size() != k) fail(Errc::LengthMismatch, "noise length differs from K");
  const auto truncated = apply_top_k(dist, k);
  std::vector<double> mixed(truncated.weights().begin(), truncated.weights().end());
  for (std::size_t i = 0; i < k; ++i) {
    mixed[i] = (1.0 - noise_weight) * mixed[i] + noise_weight * noise[i];
  }
  return {std::move(mixed), dist.shared_perm()};
}

inline TransformedDistribution apply_noised_top_k(const SortedDistribution& dist, std::size_t k,
                                                  double noise_weight, Rng& rng) {
  detail::require_top_k(k, dist.size());
  const auto noise = sample_sorted_simplex(k, rng);
  return apply_noised_top_k(dist, k, noise_weight, noise);
}

/// k = floor(1 + max_k * u), u ~ U[0, 1), clamped to [1, max_k].
inline std::size_t draw_random_k(std::size_t max_k, Rng& rng) {
  const auto k = static_cast<std::size_t>(std::floor(1.0 + static_cast<double>(max_k) * rng.uniform()));
  return std::clamp<std::size_t>(k, 1, max_k);
}

inline TransformedDistribution apply_random_top_k(const SortedDistribution& dist,
                                                  std::size_t max_k, Rng& rng) {
  if (max_k < 1 || max_k >= dist.size()) {
    fail(Errc::HyperparamOutOfRange, "M must satisfy 1 <= M < |V|");
  }
  return apply_top_k(dist, draw_random_k(max_k, rng));
}

/// Dispatches on the spec; only stochastic transforms touch `rng`.
inline TransformedDistribution apply(const TransformSpec& spec, const SortedDistribution& dist,
                                     Rng& rng) {
  struct Visitor {
    const SortedDistribution& dist;
    Rng& rng;
    TransformedDistribution operator()(const TopK& s) const { return apply_top_k(dist, s.k); }
    TransformedDistribution operator()(const Nucleus& s) const {
      return apply_nucleus(dist, s.mass);
    }
    TransformedDistribution operator()(const Tempered& s) const {
      return apply_tempered(dist, s.temperature);
    }
    TransformedDistribution operator()(const TemperedTopK& s) const {
      return apply_tempered_top_k(dist, s.k, s.temperature);
    }
    TransformedDistribution operator()(const TargetEntropy& s) const {
      return apply_target_entropy(dist, s.entropy);
    }
    TransformedDistribution operator()(const RandomMask& s) const {
      return apply_random_mask(dist, s.rate, rng);
    }
    TransformedDistribution operator()(const RandomMaskAll& s) const {
      return apply_random_mask_all(dist, s.rate, rng);
    }
    TransformedDistribution operator()(const NoisedTopK& s) const {
      return apply_noised_top_k(dist, s.k, s.noise_weight, rng);
    }
    TransformedDistribution operator()(const RandomTopK& s) const {
      return apply_random_top_k(dist, s.max_k, rng);
    }
    TransformedDistribution operator()(const MaxEntropy& s) const {
      return apply_max_entropy(dist, s.entropy);
    }
  };
  return std::visit(Visitor{dist, rng}, spec);
}

}  // namespace slab
