#pragma once

// Quality and diversity metrics over batches of token sequences: sentence and
// corpus BLEU, self-BLEU and pooled n-gram entropy (nats).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "slab/dist.hpp"
#include "slab/error.hpp"
#include "slab/parallel.hpp"
#include "slab/rng.hpp"

namespace slab::metrics {

using Sequence = std::vector<TokenId>;

enum class Provenance { Generated, Reference };

struct SampleBatch {
  std::vector<Sequence> sequences;
  Provenance provenance = Provenance::Generated;
  std::uint64_t seed = 0;
  std::string config;

  std::size_t size() const noexcept { return sequences.size(); }
};

inline constexpr std::size_t kMaxBleuOrder = 4;

struct BleuParams {
  std::size_t max_n = 4;
  double epsilon = 0.1;  // numerator for zero-match orders n >= 2
  std::size_t threads = 1;
};

struct NgramKey {
  std::array<TokenId, kMaxBleuOrder> ids{};
  bool operator==(const NgramKey&) const = default;
};

struct NgramKeyHash {
  std::size_t operator()(const NgramKey& k) const noexcept {
    std::uint64_t h = 0;
    for (TokenId id : k.ids) h = mix64(h ^ static_cast<std::uint32_t>(id));
    return static_cast<std::size_t>(h);
  }
};

template <typename V>
using NgramMap = std::unordered_map<NgramKey, V, NgramKeyHash>;

namespace detail {

// Unused key slots hold -1 so that orders never collide.
inline NgramKey key_at(std::span<const TokenId> seq, std::size_t start, std::size_t n) {
  NgramKey key;
  key.ids.fill(-1);
  for (std::size_t j = 0; j < n; ++j) key.ids[j] = seq[start + j];
  return key;
}

inline NgramMap<std::uint32_t> count_ngrams(std::span<const TokenId> seq, std::size_t n) {
  NgramMap<std::uint32_t> counts;
  if (seq.size() < n) return counts;
  counts.reserve(seq.size() - n + 1);
  for (std::size_t i = 0; i + n <= seq.size(); ++i) ++counts[key_at(seq, i, n)];
  return counts;
}

struct SequenceHash {
  std::size_t operator()(const std::vector<TokenId>& v) const noexcept {
    std::uint64_t h = v.size();
    for (TokenId id : v) h = mix64(h ^ static_cast<std::uint32_t>(id));
    return static_cast<std::size_t>(h);
  }
};

inline void check_params(const BleuParams& p) {
  if (p.max_n < 1 || p.max_n > kMaxBleuOrder) fail(Errc::ConfigError, "max_n must be in [1, 4]");
  if (!(p.epsilon > 0.0 && p.epsilon <= 1.0)) fail(Errc::ConfigError, "bleu epsilon must be in (0, 1]");
}

inline void check_batch(std::span<const Sequence> batch, const char* what) {
  if (batch.empty()) fail(Errc::EmptyInput, std::string(what) + " batch is empty");
  for (const auto& s : batch) {
    if (s.empty()) fail(Errc::EmptyInput, std::string(what) + " batch holds an empty sequence");
  }
}

// Closest length to c in a sorted list; ties go to the shorter length.
inline std::size_t closest_length(const std::vector<std::size_t>& sorted, std::size_t c) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), c);
  if (it == sorted.end()) return sorted.back();
  if (*it == c || it == sorted.begin()) return *it;
  const std::size_t above = *it, below = *std::prev(it);
  return above - c < c - below ? above : below;
}

// Geometric mean of the clipped precisions times the brevity penalty. Orders
// above the candidate length are left out of the mean.
template <typename Clip>
double bleu_score(std::span<const TokenId> candidate, std::size_t ref_len, const BleuParams& p,
                  Clip clip) {
  const std::size_t c = candidate.size();
  const std::size_t orders = std::min(p.max_n, c);
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= orders; ++n) {
    std::uint64_t matches = 0;
    for (const auto& [key, count] : count_ngrams(candidate, n)) {
      matches += std::min<std::uint64_t>(count, clip(n, key));
    }
    const double total = static_cast<double>(c - n + 1);
    if (matches == 0) {
      if (n == 1) return 0.0;
      log_sum += std::log(p.epsilon / total);
    } else {
      log_sum += std::log(static_cast<double>(matches) / total);
    }
  }
  const double bp = ref_len > c ? std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(c)) : 1.0;
  return bp * std::exp(log_sum / static_cast<double>(orders));
}

inline double ordered_mean(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace detail

/// Per-order maximum n-gram counts over a reference batch plus its sorted
/// lengths. Built once and shared read-only by all candidates.
class ReferenceTable {
 public:
  ReferenceTable(std::span<const Sequence> refs, std::size_t max_n) : max_n_(max_n) {
    detail::check_batch(refs, "reference");
    for (std::size_t n = 1; n <= max_n; ++n) {
      auto& table = tables_[n - 1];
      for (const auto& ref : refs) {
        for (const auto& [key, count] : detail::count_ngrams(ref, n)) {
          auto& slot = table[key];
          slot = std::max(slot, count);
        }
      }
    }
    for (const auto& ref : refs) lengths_.push_back(ref.size());
    std::sort(lengths_.begin(), lengths_.end());
  }

  std::uint32_t max_count(std::size_t n, const NgramKey& key) const {
    const auto& table = tables_[n - 1];
    auto it = table.find(key);
    return it == table.end() ? 0 : it->second;
  }

  std::size_t closest_length(std::size_t c) const { return detail::closest_length(lengths_, c); }
  std::size_t max_n() const noexcept { return max_n_; }

 private:
  std::size_t max_n_;
  std::array<NgramMap<std::uint32_t>, kMaxBleuOrder> tables_;
  std::vector<std::size_t> lengths_;
};

inline double sentence_bleu(std::span<const TokenId> candidate, const ReferenceTable& refs,
                            const BleuParams& params = {}) {
  if (candidate.empty()) fail(Errc::EmptyInput, "candidate is empty");
  if (params.max_n > refs.max_n()) fail(Errc::ConfigError, "reference table built for a lower max_n");
  return detail::bleu_score(candidate, refs.closest_length(candidate.size()), params,
                            [&](std::size_t n, const NgramKey& key) { return refs.max_count(n, key); });
}

inline double sentence_bleu(std::span<const TokenId> candidate, std::span<const Sequence> refs,
                            const BleuParams& params = {}) {
  detail::check_params(params);
  return sentence_bleu(candidate, ReferenceTable(refs, params.max_n), params);
}

/// Mean sentence BLEU of every generated sequence against the references.
inline double corpus_bleu(std::span<const Sequence> gen, std::span<const Sequence> refs,
                          const BleuParams& params = {}) {
  detail::check_params(params);
  detail::check_batch(gen, "generated");
  const ReferenceTable table(refs, params.max_n);
  std::vector<double> scores(gen.size());
  parallel_for(gen.size(), params.threads,
               [&](std::size_t i) { scores[i] = sentence_bleu(gen[i], table, params); });
  return detail::ordered_mean(scores);
}

/// Corpus BLEU of the batch against itself with each candidate left out of
/// its own references. Per n-gram the table keeps the two largest counts and
/// the owner of the largest, which is enough to clip without the candidate.
inline double self_bleu(std::span<const Sequence> gen, const BleuParams& params = {}) {
  detail::check_params(params);
  detail::check_batch(gen, "generated");
  if (gen.size() < 2) fail(Errc::EmptyInput, "self-BLEU needs at least two sequences");
  struct TopTwo {
    std::uint32_t first = 0;
    std::uint32_t second = 0;
    std::size_t owner = 0;
  };
  std::array<NgramMap<TopTwo>, kMaxBleuOrder> tables;
  for (std::size_t n = 1; n <= params.max_n; ++n) {
    for (std::size_t s = 0; s < gen.size(); ++s) {
      for (const auto& [key, count] : detail::count_ngrams(gen[s], n)) {
        auto& t = tables[n - 1][key];
        if (count > t.first) {
          t.second = t.first;
          t.first = count;
          t.owner = s;
        } else if (count > t.second) {
          t.second = count;
        }
      }
    }
  }
  std::vector<std::size_t> lengths;
  for (const auto& s : gen) lengths.push_back(s.size());
  std::sort(lengths.begin(), lengths.end());

  std::vector<double> scores(gen.size());
  parallel_for(gen.size(), params.threads, [&](std::size_t j) {
    const std::size_t c = gen[j].size();
    std::size_t ref_len = c;
    if (std::upper_bound(lengths.begin(), lengths.end(), c) -
            std::lower_bound(lengths.begin(), lengths.end(), c) < 2) {
      std::vector<std::size_t> others;
      auto below = std::lower_bound(lengths.begin(), lengths.end(), c);
      if (below != lengths.begin()) others.push_back(*std::prev(below));
      auto above = std::upper_bound(lengths.begin(), lengths.end(), c);
      if (above != lengths.end()) others.push_back(*above);
      ref_len = detail::closest_length(others, c);
    }
    scores[j] = detail::bleu_score(gen[j], ref_len, params, [&](std::size_t n, const NgramKey& key) {
      const auto& t = tables[n - 1].at(key);
      return t.owner == j ? t.second : t.first;
    });
  });
  return detail::ordered_mean(scores);
}

struct NgramStats {
  double entropy = 0.0;
  std::uint64_t total = 0;
  std::uint64_t distinct = 0;
};

/// Entropy of the n-gram frequency distribution pooled over the batch.
inline NgramStats ngram_stats(std::span<const Sequence> gen, std::size_t n = 3) {
  if (n < 1) fail(Errc::ConfigError, "n-gram order must be positive");
  std::unordered_map<std::vector<TokenId>, std::uint64_t, detail::SequenceHash> counts;
  std::vector<TokenId> gram(n);
  for (const auto& seq : gen) {
    for (std::size_t i = 0; i + n <= seq.size(); ++i) {
      std::copy_n(seq.begin() + static_cast<std::ptrdiff_t>(i), n, gram.begin());
      ++counts[gram];
    }
  }
  if (counts.empty()) fail(Errc::NoNgrams, "no sequence has " + std::to_string(n) + " tokens");
  std::vector<std::uint64_t> values;
  values.reserve(counts.size());
  NgramStats stats;
  for (const auto& [g, c] : counts) {
    values.push_back(c);
    stats.total += c;
  }
  std::sort(values.begin(), values.end());
  const double total = static_cast<double>(stats.total);
  for (auto c : values) {
    const double r = static_cast<double>(c) / total;
    stats.entropy -= r * std::log(r);
  }
  stats.distinct = values.size();
  return stats;
}

inline double ngram_entropy(std::span<const Sequence> gen, std::size_t n = 3) {
  return ngram_stats(gen, n).entropy;
}

}  // namespace slab::metrics
