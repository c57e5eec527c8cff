#pragma once

// Quality-diversity sweeps: corpus splits, per-config generation and scoring,
// the gold row from held-out text, and the CSV table format.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "slab/error.hpp"
#include "slab/lm/generate.hpp"
#include "slab/lm/model.hpp"
#include "slab/lm/ngram.hpp"
#include "slab/lm/replay.hpp"
#include "slab/lm/vocab.hpp"
#include "slab/metrics.hpp"
#include "slab/parallel.hpp"
#include "slab/rng.hpp"
#include "slab/transform_spec.hpp"

namespace slab::sweep {

using metrics::Sequence;

// ---------------------------------------------------------------- splits

struct Fractions {
  double train = 0.80;
  double validation = 0.15;
  double test = 0.05;

  static Fractions preset(std::string_view name) {
    if (name == "default") return {};
    if (name == "wiki") return {0.97, 0.015, 0.015};
    fail(Errc::ConfigError, "unknown split preset '" + std::string(name) + "'");
  }
};

template <typename T>
struct Splits {
  std::vector<T> train;
  std::vector<T> validation;
  std::vector<T> test;
};

namespace detail {

inline std::size_t share(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

}  // namespace detail

/// Contiguous train / validation / test blocks in corpus order. When the
/// fractions sum to 1 the test block takes the remainder.
template <typename T>
Splits<T> split_corpus(const std::vector<T>& corpus, const Fractions& f = {}) {
  if (!(f.train > 0.0 && f.validation > 0.0 && f.test > 0.0)) {
    fail(Errc::ConfigError, "split fractions must be positive");
  }
  const double sum = f.train + f.validation + f.test;
  if (sum > 1.0 + 1e-9) fail(Errc::ConfigError, "split fractions sum above 1");
  const std::size_t n = corpus.size();
  const std::size_t n_train = detail::share(f.train, n);
  const std::size_t n_val = detail::share(f.validation, n);
  const std::size_t n_test = std::abs(sum - 1.0) <= 1e-9 ? n - n_train - n_val : detail::share(f.test, n);
  if (n_val == 0 || n_test == 0) fail(Errc::ConfigError, "validation or test split is empty");
  Splits<T> s;
  auto it = corpus.begin();
  s.train.assign(it, it + static_cast<std::ptrdiff_t>(n_train));
  it += static_cast<std::ptrdiff_t>(n_train);
  s.validation.assign(it, it + static_cast<std::ptrdiff_t>(n_val));
  it += static_cast<std::ptrdiff_t>(n_val);
  s.test.assign(it, it + static_cast<std::ptrdiff_t>(n_test));
  return s;
}

// ---------------------------------------------------------------- rows

struct QDPoint {
  std::string family;
  std::string spec;
  double quality_corpus_bleu = 0.0;
  double diversity_self_bleu = 0.0;
  double diversity_ngram_entropy = 0.0;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  bool operator==(const QDPoint&) const = default;
};

struct QDTable {
  std::vector<QDPoint> rows;
  bool operator==(const QDTable&) const = default;
};

struct SweepParams {
  std::vector<TransformSpec> grid;
  std::size_t n_samples = 1000;
  std::size_t entropy_samples = 0;  // 0: same as n_samples
  std::size_t prefix_len = 10;
  std::size_t min_len = 40;
  std::size_t max_len = 50;
  std::uint64_t seed = 0;
  std::size_t max_n = 4;
  std::size_t entropy_n = 3;
  double bleu_epsilon = 0.1;
  std::size_t threads = 0;
  bool filter_eval_splits = false;

  std::size_t entropy_count() const { return entropy_samples == 0 ? n_samples : entropy_samples; }
  metrics::BleuParams bleu() const { return {max_n, bleu_epsilon, threads}; }
};

/// References, held-out text and prefix sources drawn from the evaluation
/// splits.
struct EvalData {
  std::vector<Sequence> refs;      // first n_samples of validation
  std::vector<Sequence> held_out;  // first entropy_count() of test
  std::vector<Sequence> prefixes;  // test sequences cut to prefix_len, used round-robin
};

inline void validate(const SweepParams& p) {
  if (p.n_samples < 2) fail(Errc::ConfigError, "n_samples must be at least 2");
  if (p.prefix_len < 1) fail(Errc::ConfigError, "prefix_len must be positive");
  if (p.min_len > p.max_len) fail(Errc::ConfigError, "min_len exceeds max_len");
  if (p.prefix_len > p.max_len) fail(Errc::ConfigError, "prefix_len exceeds max_len");
  if (p.max_n < 1 || p.max_n > metrics::kMaxBleuOrder) fail(Errc::ConfigError, "max_n must be in [1, 4]");
  if (p.entropy_n < 1) fail(Errc::ConfigError, "entropy_n must be positive");
  if (!(p.bleu_epsilon > 0.0 && p.bleu_epsilon <= 1.0)) fail(Errc::ConfigError, "bleu_epsilon must be in (0, 1]");
}

inline EvalData make_eval_data(const std::vector<Sequence>& validation, const std::vector<Sequence>& test,
                               const SweepParams& p) {
  validate(p);
  auto in_window = [&](const Sequence& s) {
    return !p.filter_eval_splits || (s.size() >= p.min_len && s.size() <= p.max_len);
  };
  EvalData data;
  for (const auto& s : validation) {
    if (data.refs.size() == p.n_samples) break;
    if (!s.empty() && in_window(s)) data.refs.push_back(s);
  }
  for (const auto& s : test) {
    if (data.held_out.size() < p.entropy_count() && !s.empty() && in_window(s)) data.held_out.push_back(s);
    if (s.size() >= p.prefix_len && in_window(s)) {
      data.prefixes.emplace_back(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(p.prefix_len));
    }
  }
  if (data.refs.size() < p.n_samples) {
    fail(Errc::ConfigError, "validation split has " + std::to_string(data.refs.size()) +
                                " usable sequences, need n_samples = " + std::to_string(p.n_samples));
  }
  if (data.held_out.size() < p.entropy_count()) {
    fail(Errc::ConfigError, "test split has " + std::to_string(data.held_out.size()) +
                                " usable sequences, need " + std::to_string(p.entropy_count()));
  }
  if (data.prefixes.empty()) fail(Errc::ConfigError, "no test sequence is long enough for a prefix");
  return data;
}

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed of one grid point; depends only on the base seed and the spec text,
/// so adding or removing other configs never changes a row.
inline std::uint64_t config_seed(std::uint64_t base, const TransformSpec& spec) {
  return derive_seed(base, fnv1a(to_string(spec)));
}

/// Generates the samples of one config. Sample i uses prefix i mod |prefixes|
/// and its own rng stream, so the output is the same for any thread count.
inline std::vector<Sequence> generate_batch(const lm::LanguageModel& model, const EvalData& data,
                                            const TransformSpec& spec, std::uint64_t seed,
                                            std::size_t count, const SweepParams& p) {
  std::vector<Sequence> samples(count);
  parallel_for(count, p.threads, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    samples[i] = lm::generate(model, data.prefixes[i % data.prefixes.size()], spec, rng, p.max_len,
                              p.min_len);
  });
  return samples;
}

inline QDPoint score_batch(std::string family, std::string spec, const std::vector<Sequence>& samples,
                           const std::vector<Sequence>& refs, std::uint64_t seed, const SweepParams& p) {
  const std::span<const Sequence> all(samples);
  const auto bleu_part = all.first(std::min(p.n_samples, samples.size()));
  QDPoint row;
  row.family = std::move(family);
  row.spec = std::move(spec);
  row.quality_corpus_bleu = metrics::corpus_bleu(bleu_part, refs, p.bleu());
  row.diversity_self_bleu = metrics::self_bleu(bleu_part, p.bleu());
  row.diversity_ngram_entropy =
      metrics::ngram_entropy(all.first(std::min(p.entropy_count(), samples.size())), p.entropy_n);
  row.n_samples = bleu_part.size();
  row.seed = seed;
  return row;
}

inline QDPoint run_config(const lm::LanguageModel& model, const EvalData& data, const TransformSpec& spec,
                          const SweepParams& p) {
  const auto seed = config_seed(p.seed, spec);
  const auto samples =
      generate_batch(model, data, spec, seed, std::max(p.n_samples, p.entropy_count()), p);
  return score_batch(std::string(family_name(spec)), to_string(spec), samples, data.refs, seed, p);
}

/// Human-text anchor: held-out text scored against the references.
inline QDPoint gold_row(const std::vector<Sequence>& refs, const std::vector<Sequence>& held_out,
                        const SweepParams& p) {
  if (refs.empty() || held_out.empty()) fail(Errc::EmptyInput, "gold row needs references and held-out text");
  return score_batch("gold", "gold", held_out, refs, p.seed, p);
}

using RowCallback = std::function<void(const QDPoint&)>;

/// One row per grid entry in grid order, then the gold row. on_row sees each
/// row as soon as it is complete, so finished rows survive a later failure.
inline QDTable run_sweep(const lm::LanguageModel& model, const EvalData& data, const SweepParams& p,
                         const RowCallback& on_row = {}) {
  validate(p);
  if (p.grid.empty()) fail(Errc::ConfigError, "sweep grid is empty");
  std::set<std::string> seen;
  for (const auto& spec : p.grid) {
    if (!seen.insert(to_string(spec)).second) fail(Errc::ConfigError, "duplicate grid entry " + to_string(spec));
  }
  QDTable table;
  auto emit = [&](QDPoint row) {
    if (on_row) on_row(row);
    table.rows.push_back(std::move(row));
  };
  for (const auto& spec : p.grid) emit(run_config(model, data, spec, p));
  emit(gold_row(data.refs, data.held_out, p));
  return table;
}

// ---------------------------------------------------------------- CSV

inline constexpr std::string_view kCsvHeader =
    "family,spec,quality_corpus_bleu,diversity_self_bleu,diversity_ngram_entropy,n_samples,seed";

namespace detail {

inline std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\n") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (quoted) fail(Errc::ConfigError, "unterminated quote in CSV line");
  return fields;
}

template <typename Int>
Int parse_integer(const std::string& text, std::string_view what) {
  Int value{};
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    fail(Errc::ConfigError, "bad integer '" + text + "' for " + std::string(what));
  }
  return value;
}

}  // namespace detail

inline std::string csv_row(const QDPoint& r) {
  return detail::csv_field(r.family) + ',' + detail::csv_field(r.spec) + ',' +
         format_number(r.quality_corpus_bleu) + ',' + format_number(r.diversity_self_bleu) + ',' +
         format_number(r.diversity_ngram_entropy) + ',' + std::to_string(r.n_samples) + ',' +
         std::to_string(r.seed);
}

inline void write_csv(const QDTable& table, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const auto& r : table.rows) out << csv_row(r) << '\n';
}

inline void export_table(const QDTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot write " + path);
  write_csv(table, out);
  out.flush();
  if (!out) fail(Errc::IoError, "write failed for " + path);
}

inline QDTable read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) fail(Errc::ConfigError, "missing or unexpected CSV header");
  QDTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 7) fail(Errc::ConfigError, "CSV row has " + std::to_string(f.size()) + " fields");
    table.rows.push_back({f[0], f[1], parse_number(f[2], "quality_corpus_bleu"),
                          parse_number(f[3], "diversity_self_bleu"),
                          parse_number(f[4], "diversity_ngram_entropy"),
                          detail::parse_integer<std::size_t>(f[5], "n_samples"),
                          detail::parse_integer<std::uint64_t>(f[6], "seed")});
  }
  return table;
}

inline QDTable load_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + path);
  return read_csv(in);
}

// ---------------------------------------------------------------- config

/// How to obtain the model and the corpus splits for a sweep.
struct SweepConfig {
  std::string model_path;   // trained n-gram model; empty to train in process
  std::string replay_path;  // logits replay instead of a model
  std::string corpus_path;  // text (one sentence per line) or .jsonl token records
  lm::Tokenizer tokenizer = lm::Tokenizer::Whitespace;
  std::size_t rechunk_min_tokens = 0;
  std::size_t max_vocab = 0;
  bool train_as_stream = false;  // train on the train split joined into one sequence
  lm::NgramParams train;
  Fractions split;
  SweepParams params;
};

inline SweepConfig parse_sweep_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  SweepConfig c;
  auto path = [&](const char* key) -> std::string {
    if (!j.contains(key)) return {};
    std::filesystem::path p = j.at(key).get<std::string>();
    return (p.is_relative() && !base_dir.empty() ? base_dir / p : p).string();
  };
  static const std::set<std::string> known = {
      "model", "replay", "corpus", "tokenizer", "rechunk_min_tokens", "max_vocab", "train_as_stream", "train", "split",
      "preset", "grid", "n_samples", "entropy_samples", "prefix_len", "min_len", "max_len", "seed",
      "max_n", "entropy_n", "bleu_epsilon", "threads", "filter_eval_splits"};
  try {
    if (!j.is_object()) fail(Errc::ConfigError, "sweep config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (!known.contains(key)) fail(Errc::ConfigError, "unknown sweep config field '" + key + "'");
    }
    c.model_path = path("model");
    c.replay_path = path("replay");
    c.corpus_path = path("corpus");
    if (c.corpus_path.empty()) fail(Errc::ConfigError, "sweep config needs a corpus");
    if (!c.model_path.empty() && !c.replay_path.empty()) fail(Errc::ConfigError, "give model or replay, not both");
    if (j.contains("tokenizer")) c.tokenizer = lm::parse_tokenizer(j["tokenizer"].get<std::string>());
    c.rechunk_min_tokens = j.value("rechunk_min_tokens", std::size_t{0});
    c.max_vocab = j.value("max_vocab", std::size_t{0});
    c.train_as_stream = j.value("train_as_stream", false);
    if (j.contains("train")) {
      const auto& t = j["train"];
      c.train.order = t.value("order", c.train.order);
      c.train.delta = t.value("delta", c.train.delta);
      c.train.floor = t.value("floor", c.train.floor);
    }
    if (j.contains("preset")) c.split = Fractions::preset(j["preset"].get<std::string>());
    if (j.contains("split")) {
      const auto s = j["split"].get<std::vector<double>>();
      if (s.size() != 3) fail(Errc::ConfigError, "split needs three fractions");
      c.split = {s[0], s[1], s[2]};
    }
    auto& p = c.params;
    if (!j.contains("grid")) fail(Errc::ConfigError, "sweep config needs a grid");
    for (const auto& s : j["grid"]) p.grid.push_back(parse_transform_spec(s.get<std::string>()));
    p.n_samples = j.value("n_samples", p.n_samples);
    p.entropy_samples = j.value("entropy_samples", p.entropy_samples);
    p.prefix_len = j.value("prefix_len", p.prefix_len);
    p.min_len = j.value("min_len", p.min_len);
    p.max_len = j.value("max_len", p.max_len);
    p.seed = j.value("seed", p.seed);
    p.max_n = j.value("max_n", p.max_n);
    p.entropy_n = j.value("entropy_n", p.entropy_n);
    p.bleu_epsilon = j.value("bleu_epsilon", p.bleu_epsilon);
    p.threads = j.value("threads", p.threads);
    p.filter_eval_splits = j.value("filter_eval_splits", p.filter_eval_splits);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ConfigError, std::string("sweep config: ") + e.what());
  }
  return c;
}

inline SweepConfig load_sweep_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoError, "cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ConfigError, path + ": " + e.what());
  }
  return parse_sweep_config(j, std::filesystem::path(path).parent_path());
}

/// Reads a JSON-lines file of {"tokens": [ids]} or {"text": "..."} records;
/// text records need a vocabulary.
inline std::vector<Sequence> read_sequences(const std::string& path, const lm::Vocabulary* vocab) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoError, "cannot open " + path);
  std::vector<Sequence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      if (rec.contains("tokens")) {
        out.push_back(rec["tokens"].get<Sequence>());
      } else if (rec.contains("text")) {
        if (!vocab) fail(Errc::ConfigError, path + ": text records need a model vocabulary");
        out.push_back(vocab->encode(rec["text"].get<std::string>()));
      } else {
        fail(Errc::ConfigError, path + ":" + std::to_string(line_no) + ": record has no tokens or text");
      }
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::ConfigError, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

/// Concatenates sequences into one, so that training sees a single end of text.
inline std::vector<Sequence> join(const std::vector<Sequence>& seqs) {
  Sequence all;
  for (const auto& s : seqs) all.insert(all.end(), s.begin(), s.end());
  return {std::move(all)};
}

/// A loaded or freshly trained model with the encoded corpus splits.
struct Workspace {
  std::unique_ptr<lm::LanguageModel> model;
  const lm::Vocabulary* vocab = nullptr;
  Splits<Sequence> splits;
};

inline Workspace open_workspace(const SweepConfig& c) {
  Workspace ws;
  const bool jsonl = std::filesystem::path(c.corpus_path).extension() == ".jsonl";
  if (!c.replay_path.empty()) {
    if (!jsonl) fail(Errc::ConfigError, "a replay sweep needs a .jsonl token corpus");
    ws.model = std::make_unique<lm::LogitsReplay>(lm::LogitsReplay::load(c.replay_path));
    ws.splits = split_corpus(read_sequences(c.corpus_path, nullptr), c.split);
    return ws;
  }
  std::unique_ptr<lm::NgramModel> ngram;
  if (!c.model_path.empty()) ngram = std::make_unique<lm::NgramModel>(lm::load_model(c.model_path));
  std::vector<Sequence> encoded;
  if (jsonl) {
    if (!ngram) fail(Errc::ConfigError, "training in process needs a text corpus");
    encoded = read_sequences(c.corpus_path, &ngram->vocab());
  } else {
    const auto sentences =
        lm::rechunk(lm::read_corpus(c.corpus_path, ngram ? ngram->vocab().tokenizer() : c.tokenizer),
                    c.rechunk_min_tokens);
    if (sentences.empty()) fail(Errc::EmptyCorpus, c.corpus_path + " has no sentences");
    const lm::Vocabulary vocab =
        ngram ? ngram->vocab() : lm::Vocabulary::build(sentences, c.tokenizer, c.max_vocab);
    encoded.reserve(sentences.size());
    for (const auto& s : sentences) encoded.push_back(vocab.encode(s));
    if (!ngram) {
      auto splits = split_corpus(encoded, c.split);
      ngram = std::make_unique<lm::NgramModel>(
          lm::train_ngram(c.train_as_stream ? join(splits.train) : splits.train, vocab, c.train));
      ws.splits = std::move(splits);
    }
  }
  if (ws.splits.validation.empty()) ws.splits = split_corpus(encoded, c.split);
  for (const auto& seq : ws.splits.validation) {
    for (TokenId id : seq) {
      if (id < 0 || static_cast<std::size_t>(id) >= ngram->vocab_size()) {
        fail(Errc::ConfigError, "corpus token id outside the model vocabulary");
      }
    }
  }
  ws.vocab = &ngram->vocab();
  ws.model = std::move(ngram);
  return ws;
}

inline QDTable run_sweep(const SweepConfig& c, const RowCallback& on_row = {}) {
  validate(c.params);
  if (c.params.grid.empty()) fail(Errc::ConfigError, "sweep grid is empty");
  const auto ws = open_workspace(c);
  const auto data = make_eval_data(ws.splits.validation, ws.splits.test, c.params);
  return run_sweep(*ws.model, data, c.params, on_row);
}

// ---------------------------------------------------------------- exit codes

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitModelData = 3;
inline constexpr int kExitMetric = 4;

inline int exit_code(Errc code) noexcept {
  switch (code) {
    case Errc::ConfigError:
    case Errc::HyperparamOutOfRange:
    case Errc::InvalidArgument:
      return kExitConfig;
    case Errc::EmptyInput:
    case Errc::NoNgrams:
      return kExitMetric;
    default:
      return kExitModelData;
  }
}

}  // namespace slab::sweep
