#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "slab/dist.hpp"
#include "slab/error.hpp"
#include "slab/lm/model.hpp"
#include "slab/lm/vocab.hpp"
#include "slab/rng.hpp"
#include "slab/transform_spec.hpp"
#include "slab/transforms.hpp"

namespace slab::lm {

inline constexpr int kMaxGenerateAttempts = 100;

struct GenerateStats {
  int attempts = 0;
  std::size_t steps = 0;
};

/// Extends `prefix` token by token until EOS or max_len tokens, redrawing the
/// whole completion while the result is shorter than min_len. Lengths count
/// the prefix and exclude the EOS.
inline std::vector<TokenId> generate(const LanguageModel& model, std::span<const TokenId> prefix,
                                     const TransformSpec& spec, Rng& rng, std::size_t max_len,
                                     std::size_t min_len, GenerateStats* stats = nullptr) {
  if (prefix.empty()) fail(Errc::ConfigError, "prefix must hold at least one token");
  if (min_len > max_len) fail(Errc::ConfigError, "min_len exceeds max_len");
  if (prefix.size() > max_len) fail(Errc::ConfigError, "prefix longer than max_len");
  std::vector<TokenId> seq;
  seq.reserve(max_len);
  for (int attempt = 1; attempt <= kMaxGenerateAttempts; ++attempt) {
    seq.assign(prefix.begin(), prefix.end());
    while (seq.size() < max_len) {
      const auto next = sample_token(apply(spec, model.next_distribution(seq), rng), rng);
      if (stats) ++stats->steps;
      if (next == kEos) break;
      seq.push_back(next);
    }
    if (stats) stats->attempts = attempt;
    if (seq.size() >= min_len) return seq;
  }
  fail(Errc::RetryExhausted, "no completion of length >= " + std::to_string(min_len) + " in " +
                                 std::to_string(kMaxGenerateAttempts) + " attempts");
}

}  // namespace slab::lm
