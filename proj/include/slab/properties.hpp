#pragma once

// Numerical checkers for the three structural properties of a transform
// (entropy reduction, order preservation, slope preservation) and the two
// lemmas behind them (tail truncation and tempering both lower entropy).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "slab/dist.hpp"
#include "slab/error.hpp"
#include "slab/rng.hpp"
#include "slab/temp_solver.hpp"
#include "slab/transform_spec.hpp"
#include "slab/transforms.hpp"

namespace slab {

inline constexpr double kEntropySlack = 1e-9;
inline constexpr double kStrictDecrease = 1e-12;
inline constexpr double kIdentityTolerance = 1e-12;
inline constexpr double kOrderTolerance = 1e-12;
inline constexpr double kSlopeTolerance = 1e-8;

struct EntropyCheck {
  double before = 0.0;
  double after = 0.0;
  bool reduced = false;
  /// The transform left every weight within 1e-12 of its source.
  bool identity_boundary = false;
  bool strictly_reduced = false;
};

struct OrderCheck {
  double worst_violation = 0.0;
  std::size_t higher_rank = 0;  // pair attaining the worst violation
  std::size_t lower_rank = 0;
  bool preserved = true;
};

/// Best affine fit ln(after) ~ slope * ln(before) + intercept.
struct SlopeFit {
  double slope = 1.0;
  double intercept = 0.0;
  double max_residual = 0.0;
  std::size_t support = 0;
  bool preserved = true;
};

struct PropertyReport {
  std::string spec;
  double entropy_before = 0.0;
  double entropy_after = 0.0;
  bool entropy_reduced = false;
  bool identity_boundary = false;
  double worst_order_violation = 0.0;
  bool order_preserved = false;
  SlopeFit slope_fit;
  bool slope_preserved = false;

  bool all_hold() const noexcept { return entropy_reduced && order_preserved && slope_preserved; }
};

namespace detail {

inline void require_same_length(std::size_t a, std::size_t b) {
  if (a != b) fail(Errc::LengthMismatch, "before/after lengths differ");
}

}  // namespace detail

inline EntropyCheck check_entropy_reduction(const SortedDistribution& before,
                                            const TransformedDistribution& after) {
  detail::require_same_length(before.size(), after.size());
  EntropyCheck check;
  check.before = entropy(before);
  check.after = entropy(after);
  check.identity_boundary = true;
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (std::abs(after[i] - before[i]) > kIdentityTolerance) {
      check.identity_boundary = false;
      break;
    }
  }
  check.strictly_reduced = check.before - check.after > kStrictDecrease;
  check.reduced = check.after <= check.before + kEntropySlack &&
                  (check.strictly_reduced || check.identity_boundary);
  return check;
}

/// Since `before` is rank-sorted, order holds iff `after` is non-increasing;
/// a running minimum finds the worst inversion in one pass.
inline OrderCheck check_order_preservation(const SortedDistribution& before,
                                           const TransformedDistribution& after) {
  detail::require_same_length(before.size(), after.size());
  OrderCheck check;
  std::size_t min_rank = 0;
  for (std::size_t j = 1; j < after.size(); ++j) {
    const double violation = after[j] - after[min_rank];
    if (violation > check.worst_violation) {
      check.worst_violation = violation;
      check.higher_rank = min_rank;
      check.lower_rank = j;
    }
    if (after[j] < after[min_rank]) min_rank = j;
  }
  check.preserved = check.worst_violation <= kOrderTolerance;
  return check;
}

/// The triple log-ratio condition over all surviving tokens is equivalent to
/// ln(after) being affine in ln(before) on the shared support; that is
/// checked by a least-squares fit. Subnormal entries carry too few bits for
/// their logarithm to be meaningful and count as zero.
inline SlopeFit check_slope_preservation(const SortedDistribution& before,
                                         const TransformedDistribution& after) {
  detail::require_same_length(before.size(), after.size());
  constexpr double kTiny = std::numeric_limits<double>::min();
  std::vector<double> x;
  std::vector<double> y;
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (before[i] >= kTiny && after[i] >= kTiny) {
      x.push_back(std::log(before[i]));
      y.push_back(std::log(after[i]));
    }
  }
  SlopeFit fit;
  fit.support = x.size();
  if (x.size() < 3) return fit;

  const double n = static_cast<double>(x.size());
  double mean_x = 0.0;
  double mean_y = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mean_x += x[i];
    mean_y += y[i];
  }
  mean_x /= n;
  mean_y /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mean_x) * (x[i] - mean_x);
    sxy += (x[i] - mean_x) * (y[i] - mean_y);
  }
  fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  fit.intercept = mean_y - fit.slope * mean_x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.slope * (x[i] - mean_x) + mean_y);
    fit.max_residual = std::max(fit.max_residual, std::abs(r));
  }
  fit.preserved = fit.max_residual <= kSlopeTolerance;
  return fit;
}

inline PropertyReport property_report(const SortedDistribution& before,
                                      const TransformedDistribution& after) {
  PropertyReport report;
  const auto e = check_entropy_reduction(before, after);
  const auto o = check_order_preservation(before, after);
  report.entropy_before = e.before;
  report.entropy_after = e.after;
  report.entropy_reduced = e.reduced;
  report.identity_boundary = e.identity_boundary;
  report.worst_order_violation = o.worst_violation;
  report.order_preserved = o.preserved;
  report.slope_fit = check_slope_preservation(before, after);
  report.slope_preserved = report.slope_fit.preserved;
  return report;
}

/// Applies the transform once and runs all three checkers on the result.
inline PropertyReport full_report(const TransformSpec& spec, const SortedDistribution& dist,
                                  Rng& rng) {
  auto report = property_report(dist, apply(spec, dist, rng));
  report.spec = to_string(spec);
  return report;
}

inline void to_json(nlohmann::json& j, const PropertyReport& r) {
  j = nlohmann::json{
      {"spec", r.spec},
      {"entropy_before", r.entropy_before},
      {"entropy_after", r.entropy_after},
      {"entropy_reduced", r.entropy_reduced},
      {"identity_boundary", r.identity_boundary},
      {"worst_order_violation", r.worst_order_violation},
      {"order_preserved", r.order_preserved},
      {"slope_fit",
       {{"a", r.slope_fit.slope},
        {"b", r.slope_fit.intercept},
        {"max_residual", r.slope_fit.max_residual},
        {"support", r.slope_fit.support}}},
      {"slope_preserved", r.slope_preserved},
  };
}

// ---------------------------------------------------------------------------
// Lemma verification

struct TruncationTrace {
  /// Entropy after each removal; entropies[0] is the input, back() is 0.
  std::vector<double> entropies;
  /// (H_before - H_after) / s for each removal of mass s, computed in closed
  /// form so that decrements far below the resolution of H stay visible.
  std::vector<double> scaled_decrements;
  bool strictly_decreasing = false;
};

/// Repeatedly drops the least probable token, renormalizes, and confirms
/// that entropy falls at every step down to a single token.
inline TruncationTrace truncation_trace(const SortedDistribution& dist) {
  const auto probs = dist.probs();
  if (probs.size() < 2 || !(probs.back() > 0.0)) {
    fail(Errc::InvalidArgument, "truncation lemma needs |V| >= 2 and a positive tail");
  }
  // Prefix sums of p and p ln p give each truncated entropy in O(1):
  // H(prefix m, renormalized) = ln S_m - A_m / S_m.
  const std::size_t n = probs.size();
  std::vector<double> mass(n + 1, 0.0);
  std::vector<double> plogp(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    mass[i + 1] = mass[i] + probs[i];
    plogp[i + 1] = plogp[i] + probs[i] * std::log(probs[i]);
  }
  auto prefix_entropy = [&](std::size_t m) {
    return m == 1 ? 0.0 : std::log(mass[m]) - plogp[m] / mass[m];
  };

  TruncationTrace trace;
  trace.strictly_decreasing = true;
  double h = entropy(probs);
  trace.entropies.push_back(h);
  for (std::size_t m = n; m >= 2; --m) {
    const double s = probs[m - 1] / mass[m];
    // (H - H') / s = (-ln s - H) / (1 - s) - log1p(-s) / s
    const double scaled = (-std::log(s) - h) / (1.0 - s) - std::log1p(-s) / s;
    const double next = prefix_entropy(m - 1);
    trace.scaled_decrements.push_back(scaled);
    if (!(scaled > 0.0) || next > h + kStrictDecrease) trace.strictly_decreasing = false;
    trace.entropies.push_back(next);
    h = next;
  }
  return trace;
}

inline bool verify_truncation_lemma(const SortedDistribution& dist) {
  return truncation_trace(dist).strictly_decreasing;
}

/// log H(temper(dist, t)), evaluated entirely in log space so that entropies
/// far below the double range still compare correctly.
inline double log_tempered_entropy(const SortedDistribution& dist, double t) {
  const auto x = detail::scaled_log_probs(dist, t);
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  auto log_sum_exp = [](std::span<const double> v) {
    double m = kNegInf;
    for (double e : v) m = std::max(m, e);
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (double e : v) s += std::exp(e - m);
    return m + std::log(s);
  };
  // x[0] == 0, so ln Z = softplus(r) with r the log-sum-exp of the rest.
  const double r = log_sum_exp(std::span<const double>(x).subspan(1));
  if (r == kNegInf) return kNegInf;  // single-token support: H = 0
  const double log_z = r > 30.0 ? r + std::log1p(std::exp(-r)) : std::log1p(std::exp(r));
  const double log_log_z = r < -30.0 ? r + std::log1p(-0.5 * std::exp(r)) : std::log(log_z);

  // H = sum_i w_i (-l_i) with l_i = x_i - ln Z, so log H = LSE(l_i + ln(-l_i)).
  std::vector<double> terms;
  terms.reserve(x.size());
  for (double xi : x) {
    if (xi == kNegInf) continue;
    const double neg_l = log_z - xi;
    const double log_neg_l = xi == 0.0 ? log_log_z : std::log(neg_l);
    terms.push_back(xi - log_z + log_neg_l);
  }
  return log_sum_exp(terms);
}

struct TemperatureTrace {
  std::vector<double> entropies;
  std::vector<double> log_entropies;
  /// Central differences of log H at each grid point (same sign as dH/dT).
  std::vector<double> log_entropy_slopes;
  bool strictly_increasing = false;
};

inline constexpr double kTemperatureStep = 1e-5;

inline TemperatureTrace temperature_trace(const SortedDistribution& dist,
                                          std::span<const double> grid) {
  const auto range = attainable_entropy_range(dist);
  if (range.min == range.max) {
    fail(Errc::UniformInput, "entropy does not depend on temperature for uniform inputs");
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > kTemperatureStep) || (i > 0 && !(grid[i] > grid[i - 1]))) {
      fail(Errc::InvalidArgument, "temperature grid must be ascending and positive");
    }
  }
  TemperatureTrace trace;
  trace.strictly_increasing = true;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = grid[i];
    trace.entropies.push_back(tempered_entropy(dist, t));
    trace.log_entropies.push_back(log_tempered_entropy(dist, t));
    const double slope = (log_tempered_entropy(dist, t + kTemperatureStep) -
                          log_tempered_entropy(dist, t - kTemperatureStep)) /
                         (2.0 * kTemperatureStep);
    trace.log_entropy_slopes.push_back(slope);
    if (!(slope > 0.0)) trace.strictly_increasing = false;
    if (i > 0 && !(trace.log_entropies[i] > trace.log_entropies[i - 1])) {
      trace.strictly_increasing = false;
    }
  }
  return trace;
}

inline bool verify_temperature_monotonicity(const SortedDistribution& dist,
                                            std::span<const double> grid) {
  return temperature_trace(dist, grid).strictly_increasing;
}

}  // namespace slab
