#pragma once

// Temperature root-finding for entropy-targeted tempering.
//
// Entropy of p^(1/t) (renormalized) is strictly increasing in t for any
// distribution that is not uniform on its support, so a bracketed bisection
// always converges for targets strictly inside the attainable range
// (ln #maxima, ln #support).

#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <utility>
#include <vector>

#include "slab/dist.hpp"
#include "slab/error.hpp"

namespace slab {

inline constexpr double kEntropyTolerance = 1e-6;
inline constexpr int kMaxSolverIterations = 200;
inline constexpr double kTieTolerance = 1e-12;

namespace detail {

// Log-weights (ln p_i - ln p_1) / t of the positive support, in rank order;
// zero-probability ranks map to -inf.
inline std::vector<double> scaled_log_probs(const SortedDistribution& dist, double t) {
  const auto probs = dist.probs();
  const double log_top = std::log(probs[0]);
  std::vector<double> x(probs.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < probs.size() && probs[i] > 0.0; ++i) {
    x[i] = (std::log(probs[i]) - log_top) / t;
  }
  return x;
}

}  // namespace detail

/// Tempering with an unrestricted temperature t > 0 (t > 1 flattens).
/// Computed in log space; zero-probability ranks stay zero.
inline TransformedDistribution temper(const SortedDistribution& dist, double t) {
  if (!(t > 0.0) || !std::isfinite(t)) fail(Errc::HyperparamOutOfRange, "temperature must be > 0");
  auto weights = detail::scaled_log_probs(dist, t);
  double z = 0.0;
  for (double& v : weights) {
    v = std::exp(v);
    z += v;
  }
  for (double& v : weights) v /= z;
  return {std::move(weights), dist.shared_perm()};
}

/// Entropy of temper(dist, t) without materializing the weights.
inline double tempered_entropy(const SortedDistribution& dist, double t) {
  const auto probs = dist.probs();
  const double log_top = std::log(probs[0]);
  double z = 0.0;
  double weighted = 0.0;
  for (std::size_t i = 0; i < probs.size() && probs[i] > 0.0; ++i) {
    const double x = (std::log(probs[i]) - log_top) / t;
    const double w = std::exp(x);
    z += w;
    weighted += w * x;
  }
  return std::log(z) - weighted / z;
}

struct EntropyRange {
  double min;  // t -> 0+: uniform over the tied maxima
  double max;  // t -> inf: uniform over the positive support
};

inline EntropyRange attainable_entropy_range(const SortedDistribution& dist) {
  const auto probs = dist.probs();
  std::size_t tied = 0;
  std::size_t support = 0;
  for (double p : probs) {
    if (probs[0] - p <= kTieTolerance) ++tied;
    if (p > 0.0) ++support;
  }
  return {std::log(static_cast<double>(tied)), std::log(static_cast<double>(support))};
}

struct SolverResult {
  double t_star = 1.0;
  double achieved_entropy = 0.0;
  int iterations = 0;
  double t_lo = 1.0;
  double t_hi = 1.0;
};

/// Finds t with H(temper(dist, t)) = target to within kEntropyTolerance.
inline SolverResult solve_temperature(const SortedDistribution& dist, double target) {
  const auto range = attainable_entropy_range(dist);
  if (!(target > range.min && target < range.max)) {
    std::ostringstream msg;
    msg << "target entropy " << target << " outside the attainable open range (" << range.min
        << ", " << range.max << ")";
    fail(Errc::EntropyUnreachable, msg.str());
  }

  SolverResult result;
  auto eval = [&](double t) {
    if (++result.iterations > kMaxSolverIterations) {
      fail(Errc::NoConvergence, "temperature solver exceeded the iteration cap");
    }
    return tempered_entropy(dist, t);
  };
  auto finish = [&](double t, double lo, double hi) {
    result.t_star = t;
    result.t_lo = lo;
    result.t_hi = hi;
    result.achieved_entropy = entropy(temper(dist, t));
    if (std::abs(result.achieved_entropy - target) > kEntropyTolerance) {
      fail(Errc::NoConvergence, "bracket collapsed before reaching the entropy tolerance");
    }
    return result;
  };

  const double h_one = eval(1.0);
  if (std::abs(h_one - target) <= kEntropyTolerance) return finish(1.0, 1.0, 1.0);

  double lo = 1.0;
  double hi = 1.0;
  if (h_one < target) {
    hi = 2.0;
    for (double h = eval(hi); h < target; h = eval(hi)) {
      if (std::abs(h - target) <= kEntropyTolerance) return finish(hi, hi, hi);
      lo = hi;
      hi *= 2.0;
    }
  } else {
    lo = 1e-4;
    for (double h = eval(lo); h > target; h = eval(lo)) {
      if (std::abs(h - target) <= kEntropyTolerance) return finish(lo, lo, lo);
      hi = lo;
      lo *= 0.5;
      if (lo < std::numeric_limits<double>::min()) {
        fail(Errc::NoConvergence, "temperature underflow while bracketing");
      }
    }
  }

  for (;;) {
    const double mid = 0.5 * (lo + hi);
    const double h = eval(mid);
    if (std::abs(h - target) <= kEntropyTolerance || hi - lo <= 1e-12 * hi) {
      return finish(mid, lo, hi);
    }
    if (h < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
}

}  // namespace slab
