#pragma once

// Next-token distributions in rank order.
//
// A SortedDistribution holds the model's conditional distribution sorted by
// descending probability together with the rank -> token id permutation.
// Transforms produce a TransformedDistribution whose weights stay aligned
// with the ranks of the source distribution (truncated ranks keep a zero).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "slab/error.hpp"
#include "slab/rng.hpp"

namespace slab {

using TokenId = std::int32_t;
using Permutation = std::shared_ptr<const std::vector<TokenId>>;

inline constexpr double kSumTolerance = 1e-9;

namespace detail {

inline void check_permutation(std::span<const TokenId> perm) {
  std::vector<std::uint8_t> seen(perm.size(), 0);
  for (TokenId id : perm) {
    if (id < 0 || static_cast<std::size_t>(id) >= perm.size() || seen[id]) {
      fail(Errc::NotADistribution, "rank permutation is not a permutation of token ids");
    }
    seen[id] = 1;
  }
}

// A NaN or negative entry fails the comparison; an infinite one makes the sum
// infinite.
inline double checked_sum(std::span<const double> values) {
  double sum = 0.0;
  bool ok = true;
  for (double v : values) {
    ok &= v >= 0.0;
    sum += v;
  }
  if (!ok || !std::isfinite(sum)) fail(Errc::NotADistribution, "negative or non-finite probability");
  return sum;
}

// Orders token ids by descending probability, ties by ascending id.
inline std::vector<TokenId> rank_order(std::span<const double> probs) {
  std::vector<TokenId> order(probs.size());
  std::iota(order.begin(), order.end(), TokenId{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](TokenId a, TokenId b) { return probs[a] > probs[b]; });
  return order;
}

}  // namespace detail

class SortedDistribution {
 public:
  std::span<const double> probs() const noexcept { return probs_; }
  std::span<const TokenId> perm() const noexcept { return *perm_; }
  const Permutation& shared_perm() const noexcept { return perm_; }
  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t rank) const noexcept { return probs_[rank]; }

  /// Adopts a vector that is already in rank order. Checks nonnegativity,
  /// descending order, the unit sum and that perm is a permutation.
  static SortedDistribution from_sorted(std::vector<double> probs, std::vector<TokenId> perm) {
    if (probs.empty()) fail(Errc::NotADistribution, "empty distribution");
    if (probs.size() != perm.size()) fail(Errc::LengthMismatch, "probs and perm differ in length");
    const double sum = detail::checked_sum(probs);
    if (std::abs(sum - 1.0) > kSumTolerance) {
      fail(Errc::NotADistribution, "probabilities sum to " + std::to_string(sum));
    }
    for (std::size_t i = 1; i < probs.size(); ++i) {
      if (probs[i] > probs[i - 1]) fail(Errc::NotADistribution, "probabilities not descending");
    }
    detail::check_permutation(perm);
    return from_sorted_unchecked(std::move(probs), std::move(perm));
  }

  /// Skips validation; for producers that construct sorted output by design.
  static SortedDistribution from_sorted_unchecked(std::vector<double> probs,
                                                  std::vector<TokenId> perm) {
    return SortedDistribution(std::move(probs),
                              std::make_shared<const std::vector<TokenId>>(std::move(perm)));
  }

 private:
  SortedDistribution(std::vector<double> probs, Permutation perm)
      : probs_(std::move(probs)), perm_(std::move(perm)) {}

  friend SortedDistribution from_probs(std::span<const double> probs);
  friend SortedDistribution from_logits(std::span<const double> logits);

  std::vector<double> probs_;
  Permutation perm_;
};

/// Sorts and renormalizes a probability vector indexed by token id.
inline SortedDistribution from_probs(std::span<const double> probs) {
  if (probs.empty()) fail(Errc::NotADistribution, "empty distribution");
  detail::checked_sum(probs);
  auto order = detail::rank_order(probs);
  std::vector<double> sorted(probs.size());
  for (std::size_t r = 0; r < order.size(); ++r) sorted[r] = probs[order[r]];
  // Summing in rank order makes the result independent of input order.
  const double sum = std::accumulate(sorted.begin(), sorted.end(), 0.0);
  if (std::abs(sum - 1.0) > 1e-6) {
    fail(Errc::NotADistribution, "probabilities sum to " + std::to_string(sum));
  }
  for (double& p : sorted) p /= sum;
  return SortedDistribution(std::move(sorted),
                            std::make_shared<const std::vector<TokenId>>(std::move(order)));
}

/// Max-subtracted softmax followed by the rank sort.
inline SortedDistribution from_logits(std::span<const double> logits) {
  if (logits.empty()) fail(Errc::NotADistribution, "empty logits");
  double max_logit = logits.front();
  for (double x : logits) {
    if (!std::isfinite(x)) fail(Errc::NonFiniteLogit, "logit is NaN or infinite");
    max_logit = std::max(max_logit, x);
  }
  std::vector<double> weights(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    weights[i] = std::exp(logits[i] - max_logit);
    z += weights[i];
  }
  auto order = detail::rank_order(weights);
  std::vector<double> sorted(weights.size());
  for (std::size_t r = 0; r < order.size(); ++r) sorted[r] = weights[order[r]] / z;
  return SortedDistribution(std::move(sorted),
                            std::make_shared<const std::vector<TokenId>>(std::move(order)));
}

class TransformedDistribution {
 public:
  /// weights[r] is the new mass of rank r of the source distribution.
  TransformedDistribution(std::vector<double> weights, Permutation perm)
      : weights_(std::move(weights)), perm_(std::move(perm)) {
    if (weights_.empty()) fail(Errc::NotADistribution, "empty distribution");
    if (!perm_ || perm_->size() != weights_.size()) {
      fail(Errc::LengthMismatch, "weights and perm differ in length");
    }
    const double sum = detail::checked_sum(weights_);
    if (std::abs(sum - 1.0) > kSumTolerance) {
      fail(Errc::NotADistribution, "weights sum to " + std::to_string(sum));
    }
  }

  static TransformedDistribution identity(const SortedDistribution& dist) {
    return {std::vector<double>(dist.probs().begin(), dist.probs().end()), dist.shared_perm()};
  }

  std::span<const double> weights() const noexcept { return weights_; }
  std::span<const TokenId> perm() const noexcept { return *perm_; }
  const Permutation& shared_perm() const noexcept { return perm_; }
  std::size_t size() const noexcept { return weights_.size(); }
  double operator[](std::size_t rank) const noexcept { return weights_[rank]; }

 private:
  std::vector<double> weights_;
  Permutation perm_;
};

/// Shannon entropy in nats with 0 ln 0 = 0.
inline double entropy(std::span<const double> probs) noexcept {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

inline double entropy(const SortedDistribution& dist) noexcept { return entropy(dist.probs()); }
inline double entropy(const TransformedDistribution& dist) noexcept {
  return entropy(dist.weights());
}

/// Inverse-CDF draw over the rank weights; consumes one uniform.
inline TokenId sample_token(const TransformedDistribution& dist, Rng& rng) {
  const auto weights = dist.weights();
  const double target = rng.uniform();
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t r = 0; r < weights.size(); ++r) {
    if (weights[r] <= 0.0) continue;
    cumulative += weights[r];
    last_positive = r;
    if (target < cumulative) return dist.perm()[r];
  }
  // Rounding left the cumulative sum just below the draw.
  return dist.perm()[last_positive];
}

}  // namespace slab
