#pragma once

#include <cstddef>
#include <span>

#include "slab/dist.hpp"

namespace slab::lm {

/// Source of next-token distributions. Implementations are immutable after
/// construction and safe to query from several threads.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  virtual SortedDistribution next_distribution(std::span<const TokenId> context) const = 0;
  virtual std::size_t vocab_size() const = 0;
};

}  // namespace slab::lm
