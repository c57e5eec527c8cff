#pragma once

// Count-based backoff n-gram model.
//
// score(w | ctx) is the relative frequency of w after the longest matching
// context that has seen w, times delta for every level backed off. At the
// bottom every token scores delta^top * s0(w) with
//   s0(w) = (1 - floor) * c(w) / N + floor / |V|
// so the emitted distribution always has full support. Scores are
// normalized per query.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "slab/dist.hpp"
#include "slab/error.hpp"
#include "slab/lm/model.hpp"
#include "slab/lm/vocab.hpp"

namespace slab::lm {

inline constexpr std::size_t kMaxOrder = 6;
inline constexpr char kModelMagic[5] = {'S', 'L', 'A', 'B', '1'};
inline constexpr std::uint32_t kModelVersion = 1;

struct NgramParams {
  std::size_t order = 4;
  double delta = 0.4;
  double floor = 1e-3;
};

namespace detail {

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    out_.write(bytes.data(), bytes.size());
  }
  template <typename T>
  void put_array(const std::vector<T>& values) {
    put<std::uint64_t>(values.size());
    for (const T& v : values) put(v);
  }
  void put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  template <typename T>
  T get() {
    std::array<char, sizeof(T)> bytes;
    read(bytes.data(), bytes.size());
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
  }
  template <typename T>
  std::vector<T> get_array(std::uint64_t limit) {
    const auto n = get<std::uint64_t>();
    if (n > limit) fail(Errc::FormatVersionMismatch, "model file array length out of range");
    std::vector<T> values(n);
    for (T& v : values) v = get<T>();
    return values;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    if (n > (1u << 20)) fail(Errc::FormatVersionMismatch, "model file string length out of range");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  void read(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      fail(Errc::FormatVersionMismatch, "model file truncated");
    }
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
};

}  // namespace detail

class NgramModel final : public LanguageModel {
 public:
  /// Empty model: holds only the reserved tokens and fails every query.
  NgramModel() = default;

  std::size_t vocab_size() const override { return vocab_.size(); }
  const Vocabulary& vocab() const noexcept { return vocab_; }
  const NgramParams& params() const noexcept { return params_; }
  bool empty() const noexcept { return levels_.empty(); }

  SortedDistribution next_distribution(std::span<const TokenId> context) const override {
    if (empty()) fail(Errc::EmptyCorpus, "model has no counts");
    const std::size_t v = vocab_.size();
    for (TokenId id : context) {
      if (id < 0 || static_cast<std::size_t>(id) >= v) {
        fail(Errc::InvalidArgument, "context token " + std::to_string(id) + " outside vocabulary");
      }
    }
    const std::size_t top = std::min(params_.order - 1, context.size());

    // owner[w] is the context length whose counts score w, 0 for the unigram
    // floor. Every level's continuations are already in score order, so the
    // output is a merge of at most `order` sorted runs.
    struct Run {
      const TokenId* ids;
      const std::uint64_t* counts;
      std::size_t size;
      std::size_t pos;
      double scale;
      double total;
      std::uint8_t tag;
      double head = -1.0;  // score at pos, -1 once exhausted
    };
    thread_local std::vector<std::uint8_t> owner;
    if (owner.size() < v) owner.assign(v, 0);
    std::array<Run, kMaxOrder> runs{};
    std::size_t num_runs = 0;
    double scale = 1.0;
    for (std::size_t len = top; len >= 1; --len) {
      const auto& level = levels_[len];
      if (auto c = level.find(context.last(len)); c != Level::npos) {
        const auto begin = level.offsets[c];
        Run run{level.next.data() + begin, level.counts.data() + begin,
                static_cast<std::size_t>(level.offsets[c + 1] - begin), 0, scale,
                static_cast<double>(level.totals[c]), static_cast<std::uint8_t>(len)};
        for (std::size_t j = 0; j < run.size; ++j) {
          if (owner[run.ids[j]] == 0) owner[run.ids[j]] = run.tag;
        }
        runs[num_runs++] = run;
      }
      scale *= params_.delta;
    }

    std::vector<double> probs(v);
    std::vector<TokenId> perm(v);
    auto advance = [&](Run& run) {
      while (run.pos < run.size && owner[run.ids[run.pos]] != run.tag) ++run.pos;
      run.head = run.pos < run.size
                     ? run.scale * static_cast<double>(run.counts[run.pos]) / run.total
                     : -1.0;
    };
    for (std::size_t i = 0; i < num_runs; ++i) advance(runs[i]);
    std::size_t r = 0, b = 0;
    while (true) {
      std::size_t best = num_runs;
      for (std::size_t i = 0; i < num_runs; ++i) {
        if (runs[i].head < 0.0) continue;
        if (best == num_runs || runs[i].head > runs[best].head ||
            (runs[i].head == runs[best].head && runs[i].ids[runs[i].pos] < runs[best].ids[runs[best].pos])) {
          best = i;
        }
      }
      if (best == num_runs) break;
      Run& run = runs[best];
      while (b < v && owner[base_order_[b]] != 0) ++b;
      if (b < v) {
        const double base = scale * base_score_[b];
        if (base > run.head || (base == run.head && base_order_[b] < run.ids[run.pos])) {
          probs[r] = base;
          perm[r++] = base_order_[b++];
          continue;
        }
      }
      probs[r] = run.head;
      perm[r++] = run.ids[run.pos++];
      advance(run);
    }
    for (; b < v; ++b) {
      if (owner[base_order_[b]] != 0) continue;
      probs[r] = scale * base_score_[b];
      perm[r++] = base_order_[b];
    }
    for (std::size_t i = 0; i < num_runs; ++i) {
      for (std::size_t j = 0; j < runs[i].size; ++j) owner[runs[i].ids[j]] = 0;
    }
    double z = 0.0;
    for (double p : probs) z += p;
    for (double& p : probs) p /= z;
    return SortedDistribution::from_sorted_unchecked(std::move(probs), std::move(perm));
  }

  /// Trains on encoded sentences; an EOS is appended to each sentence and
  /// contexts are never padded, so the first token sees only shorter contexts.
  friend NgramModel train_ngram(const std::vector<std::vector<TokenId>>& corpus, Vocabulary vocab,
                                NgramParams params);
  friend void save_model(const NgramModel& model, const std::string& path);
  friend NgramModel load_model(const std::string& path);

 private:
  struct Level {
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t width = 0;
    std::vector<TokenId> contexts;        // num_contexts * width, sorted
    std::vector<std::uint64_t> offsets;   // num_contexts + 1
    std::vector<std::uint64_t> totals;    // num_contexts
    std::vector<TokenId> next;            // continuations, count desc then id asc
    std::vector<std::uint64_t> counts;

    std::size_t num_contexts() const { return totals.size(); }

    std::size_t find(std::span<const TokenId> ctx) const {
      std::size_t lo = 0, hi = num_contexts();
      while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        const TokenId* row = contexts.data() + mid * width;
        if (std::lexicographical_compare(row, row + width, ctx.begin(), ctx.end())) lo = mid + 1;
        else hi = mid;
      }
      if (lo < num_contexts() && std::equal(ctx.begin(), ctx.end(), contexts.data() + lo * width)) {
        return lo;
      }
      return npos;
    }
  };

  void build_base_order() {
    const std::size_t v = vocab_.size();
    const auto& unigram = levels_[0];
    std::vector<std::uint64_t> c1(v, 0);
    for (std::size_t j = 0; j < unigram.next.size(); ++j) c1[unigram.next[j]] = unigram.counts[j];
    const double n = unigram.totals.empty() ? 0.0 : static_cast<double>(unigram.totals[0]);
    base_order_.resize(v);
    for (std::size_t i = 0; i < v; ++i) base_order_[i] = static_cast<TokenId>(i);
    std::stable_sort(base_order_.begin(), base_order_.end(),
                     [&](TokenId a, TokenId b) { return c1[a] > c1[b]; });
    base_score_.resize(v);
    const double uniform = params_.floor / static_cast<double>(v);
    for (std::size_t i = 0; i < v; ++i) {
      base_score_[i] = (1.0 - params_.floor) * static_cast<double>(c1[base_order_[i]]) / n + uniform;
    }
  }

  Vocabulary vocab_;
  NgramParams params_{};
  std::vector<Level> levels_;  // indexed by context length
  std::vector<TokenId> base_order_;
  std::vector<double> base_score_;
};

inline NgramModel train_ngram(const std::vector<std::vector<TokenId>>& corpus, Vocabulary vocab,
                              NgramParams params) {
  if (params.order < 1 || params.order > kMaxOrder) fail(Errc::ConfigError, "order must be in [1, 6]");
  if (!(params.delta > 0.0 && params.delta < 1.0)) fail(Errc::ConfigError, "delta must be in (0, 1)");
  if (!(params.floor > 0.0 && params.floor < 1.0)) fail(Errc::ConfigError, "floor must be in (0, 1)");
  const std::size_t v = vocab.size();
  std::size_t tokens = 0;
  for (const auto& s : corpus) {
    for (TokenId id : s) {
      if (id < 0 || static_cast<std::size_t>(id) >= v) fail(Errc::InvalidArgument, "token id outside vocabulary");
    }
    tokens += s.size();
  }
  if (tokens == 0) fail(Errc::EmptyCorpus, "corpus has no tokens");

  NgramModel model;
  model.vocab_ = std::move(vocab);
  model.params_ = params;
  model.levels_.resize(params.order);

  using Record = std::array<TokenId, kMaxOrder>;
  for (std::size_t len = 0; len < params.order; ++len) {
    std::vector<Record> records;
    for (const auto& sentence : corpus) {
      if (sentence.empty()) continue;
      const std::size_t n = sentence.size() + 1;
      auto at = [&](std::size_t i) { return i < sentence.size() ? sentence[i] : kEos; };
      for (std::size_t i = len; i < n; ++i) {
        Record rec{};
        for (std::size_t j = 0; j <= len; ++j) rec[j] = at(i - len + j);
        records.push_back(rec);
      }
    }
    std::sort(records.begin(), records.end());

    auto& level = model.levels_[len];
    level.width = len;
    level.offsets.push_back(0);
    std::vector<std::pair<std::uint64_t, TokenId>> group;
    std::size_t i = 0;
    while (i < records.size()) {
      std::size_t j = i;
      auto same_context = [&](std::size_t a, std::size_t b) {
        return std::equal(records[a].begin(), records[a].begin() + len, records[b].begin());
      };
      group.clear();
      std::uint64_t total = 0;
      while (j < records.size() && same_context(i, j)) {
        std::size_t k = j;
        while (k < records.size() && records[k] == records[j]) ++k;
        group.emplace_back(k - j, records[j][len]);
        total += k - j;
        j = k;
      }
      std::sort(group.begin(), group.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
      });
      level.contexts.insert(level.contexts.end(), records[i].begin(), records[i].begin() + len);
      for (const auto& [count, id] : group) {
        level.next.push_back(id);
        level.counts.push_back(count);
      }
      level.totals.push_back(total);
      level.offsets.push_back(level.next.size());
      i = j;
    }
  }
  model.build_base_order();
  return model;
}

inline void save_model(const NgramModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot write model " + path);
  out.write(kModelMagic, sizeof kModelMagic);
  detail::Writer w(out);
  w.put<std::uint32_t>(kModelVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(model.vocab_.tokenizer()));
  w.put<std::uint64_t>(model.vocab_.size());
  for (const auto& tok : model.vocab_.tokens()) w.put_string(tok);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.levels_.size()));
  w.put<double>(model.params_.delta);
  w.put<double>(model.params_.floor);
  for (const auto& level : model.levels_) {
    w.put_array(level.contexts);
    w.put_array(level.offsets);
    w.put_array(level.totals);
    w.put_array(level.next);
    w.put_array(level.counts);
  }
  out.flush();
  if (!out) fail(Errc::IoError, "write failed for " + path);
}

inline NgramModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open model " + path);
  char magic[sizeof kModelMagic];
  detail::Reader r(in);
  r.read(magic, sizeof magic);
  if (!std::equal(magic, magic + sizeof magic, kModelMagic)) {
    fail(Errc::FormatVersionMismatch, path + " is not a model file");
  }
  if (const auto version = r.get<std::uint32_t>(); version != kModelVersion) {
    fail(Errc::FormatVersionMismatch, "unsupported model version " + std::to_string(version));
  }
  const auto kind = r.get<std::uint8_t>();
  if (kind > 1) fail(Errc::FormatVersionMismatch, "unknown tokenizer tag");
  const auto v = r.get<std::uint64_t>();
  if (v > (1u << 28)) fail(Errc::FormatVersionMismatch, "vocabulary size out of range");
  std::vector<std::string> tokens(v);
  for (auto& t : tokens) t = r.get_string();

  NgramModel model;
  model.vocab_ = Vocabulary::from_tokens(static_cast<Tokenizer>(kind), std::move(tokens));
  const auto order = r.get<std::uint32_t>();
  if (order > kMaxOrder) fail(Errc::FormatVersionMismatch, "order out of range");
  model.params_.order = order == 0 ? NgramParams{}.order : order;
  model.params_.delta = r.get<double>();
  model.params_.floor = r.get<double>();
  constexpr std::uint64_t kLimit = std::uint64_t{1} << 34;
  model.levels_.resize(order);
  for (std::size_t len = 0; len < order; ++len) {
    auto& level = model.levels_[len];
    level.width = len;
    level.contexts = r.get_array<TokenId>(kLimit);
    level.offsets = r.get_array<std::uint64_t>(kLimit);
    level.totals = r.get_array<std::uint64_t>(kLimit);
    level.next = r.get_array<TokenId>(kLimit);
    level.counts = r.get_array<std::uint64_t>(kLimit);
    const std::size_t n = level.totals.size();
    bool ok = level.offsets.size() == n + 1 && level.contexts.size() == n * len &&
              level.next.size() == level.counts.size() && level.offsets.front() == 0 &&
              level.offsets.back() == level.next.size() && std::is_sorted(level.offsets.begin(), level.offsets.end());
    for (TokenId id : level.next) ok = ok && id >= 0 && static_cast<std::uint64_t>(id) < v;
    for (TokenId id : level.contexts) ok = ok && id >= 0 && static_cast<std::uint64_t>(id) < v;
    if (!ok) fail(Errc::FormatVersionMismatch, "inconsistent count tables");
  }
  if (!r.at_end()) fail(Errc::FormatVersionMismatch, "trailing bytes after model");
  if (order > 0) {
    if (model.levels_[0].totals.size() != 1) fail(Errc::FormatVersionMismatch, "missing unigram table");
    model.build_base_order();
  }
  return model;
}

}  // namespace slab::lm
