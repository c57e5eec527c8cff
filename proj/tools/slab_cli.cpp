#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "slab/slab.hpp"

namespace {

using nlohmann::json;
using slab::Errc;
using slab::fail;
using slab::metrics::Sequence;

std::vector<double> parse_csv_numbers(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(slab::parse_number(item, "probs"));
  if (out.empty()) fail(Errc::ConfigError, "--probs is empty");
  return out;
}

std::vector<double> dirichlet(std::size_t n, double alpha, std::mt19937_64& gen) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> v(n);
  double total = 0.0;
  while (!(total > 0.0)) {
    total = 0.0;
    for (double& x : v) total += x = gamma(gen);
  }
  for (double& x : v) x /= total;
  return v;
}

// Writes to the named file, or stdout for "" and "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_.open(path, std::ios::binary | std::ios::trunc);
    if (!file_) fail(Errc::IoError, "cannot write " + path);
    path_ = path;
  }
  std::ostream& stream() { return path_.empty() ? std::cout : file_; }
  void close() {
    stream().flush();
    if (!stream()) fail(Errc::IoError, "write failed for " + (path_.empty() ? "stdout" : path_));
  }

 private:
  std::ofstream file_;
  std::string path_;
};

struct PropertiesArgs {
  std::string spec;
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  std::size_t size = 64;
  double alpha = 1.0;
  std::string probs;
  std::string out;
};

int check_properties(const PropertiesArgs& a) {
  const auto spec = slab::parse_transform_spec(a.spec);
  if (a.trials == 0) fail(Errc::ConfigError, "--trials must be positive");
  std::mt19937_64 gen(a.seed);
  std::optional<slab::SortedDistribution> fixed;
  if (!a.probs.empty()) fixed = slab::from_probs(parse_csv_numbers(a.probs));
  json reports = json::array();
  for (std::size_t i = 0; i < a.trials; ++i) {
    const auto dist = fixed ? *fixed : slab::from_probs(dirichlet(a.size, a.alpha, gen));
    slab::Rng rng(slab::derive_seed(a.seed, i));
    reports.push_back(slab::full_report(spec, dist, rng));
  }
  Output out(a.out);
  out.stream() << reports.dump(2) << '\n';
  out.close();
  return slab::sweep::kExitOk;
}

int solve_temperature(const std::string& probs, double target) {
  const auto dist = slab::from_probs(parse_csv_numbers(probs));
  const auto r = slab::solve_temperature(dist, target);
  const json j = {{"t_star", r.t_star},
                  {"achieved_entropy", r.achieved_entropy},
                  {"iterations", r.iterations},
                  {"bracket", {r.t_lo, r.t_hi}}};
  std::cout << j.dump(2) << '\n';
  return slab::sweep::kExitOk;
}

struct TrainArgs {
  std::string corpus;
  std::string out;
  std::string tokenizer = "whitespace";
  std::string split = "default";
  slab::lm::NgramParams params;
  std::size_t max_vocab = 0;
  std::size_t rechunk = 0;
  bool stream = false;
};

int train_lm(const TrainArgs& a) {
  const auto kind = slab::lm::parse_tokenizer(a.tokenizer);
  const auto sentences = slab::lm::rechunk(slab::lm::read_corpus(a.corpus, kind), a.rechunk);
  if (sentences.empty()) fail(Errc::EmptyCorpus, a.corpus + " has no sentences");
  const auto vocab = slab::lm::Vocabulary::build(sentences, kind, a.max_vocab);
  std::vector<Sequence> encoded;
  encoded.reserve(sentences.size());
  for (const auto& s : sentences) encoded.push_back(vocab.encode(s));
  const auto train = a.split == "none" ? encoded
                                       : slab::sweep::split_corpus(encoded, slab::sweep::Fractions::preset(a.split)).train;
  const auto model = slab::lm::train_ngram(a.stream ? slab::sweep::join(train) : train, vocab, a.params);
  slab::lm::save_model(model, a.out);
  std::size_t tokens = 0;
  for (const auto& s : train) tokens += s.size();
  const json j = {{"model", a.out},
                  {"order", a.params.order},
                  {"vocab_size", vocab.size()},
                  {"train_sentences", train.size()},
                  {"train_tokens", tokens}};
  std::cerr << j.dump() << '\n';
  return slab::sweep::kExitOk;
}

struct GenerateArgs {
  std::string model;
  std::string replay;
  std::string spec;
  std::string prompts;
  std::size_t prefix_len = 10;
  std::size_t min_len = 40;
  std::size_t max_len = 50;
  std::size_t n_samples = 1000;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  std::string out;
};

std::vector<Sequence> read_prompts(const std::string& path, const slab::lm::Vocabulary* vocab) {
  if (std::filesystem::path(path).extension() == ".jsonl") return slab::sweep::read_sequences(path, vocab);
  if (!vocab) fail(Errc::ConfigError, "text prompts need a model vocabulary");
  std::vector<Sequence> out;
  for (const auto& s : slab::lm::read_corpus(path, vocab->tokenizer())) out.push_back(vocab->encode(s));
  return out;
}

int generate(const GenerateArgs& a) {
  if (a.model.empty() == a.replay.empty()) fail(Errc::ConfigError, "give exactly one of --model and --replay");
  std::unique_ptr<slab::lm::LanguageModel> model;
  const slab::lm::Vocabulary* vocab = nullptr;
  if (!a.model.empty()) {
    auto ngram = std::make_unique<slab::lm::NgramModel>(slab::lm::load_model(a.model));
    vocab = &ngram->vocab();
    model = std::move(ngram);
  } else {
    model = std::make_unique<slab::lm::LogitsReplay>(slab::lm::LogitsReplay::load(a.replay));
  }
  slab::sweep::SweepParams p;
  p.prefix_len = a.prefix_len;
  p.min_len = a.min_len;
  p.max_len = a.max_len;
  p.threads = a.threads;
  slab::sweep::EvalData data;
  for (const auto& s : read_prompts(a.prompts, vocab)) {
    if (s.size() >= a.prefix_len) data.prefixes.emplace_back(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(a.prefix_len));
  }
  if (data.prefixes.empty()) fail(Errc::ConfigError, "no prompt has " + std::to_string(a.prefix_len) + " tokens");
  const auto spec = slab::parse_transform_spec(a.spec);
  const auto samples = slab::sweep::generate_batch(*model, data, spec, a.seed, a.n_samples, p);
  Output out(a.out);
  for (const auto& s : samples) {
    json rec = {{"tokens", s}};
    if (vocab) rec["text"] = vocab->decode(s);
    out.stream() << rec.dump() << '\n';
  }
  out.close();
  return slab::sweep::kExitOk;
}

struct EvaluateArgs {
  std::string gen;
  std::string refs;
  std::string model;
  std::size_t max_n = 4;
  std::size_t entropy_n = 3;
  double epsilon = 0.1;
  std::size_t threads = 0;
};

int evaluate(const EvaluateArgs& a) {
  std::optional<slab::lm::NgramModel> model;
  if (!a.model.empty()) model = slab::lm::load_model(a.model);
  const slab::lm::Vocabulary* vocab = model ? &model->vocab() : nullptr;
  const auto gen = slab::sweep::read_sequences(a.gen, vocab);
  const auto refs = slab::sweep::read_sequences(a.refs, vocab);
  const slab::metrics::BleuParams bleu{a.max_n, a.epsilon, a.threads};
  const auto stats = slab::metrics::ngram_stats(gen, a.entropy_n);
  const json j = {{"corpus_bleu", slab::metrics::corpus_bleu(gen, refs, bleu)},
                  {"self_bleu", slab::metrics::self_bleu(gen, bleu)},
                  {"ngram_entropy", stats.entropy},
                  {"counts",
                   {{"generated", gen.size()},
                    {"references", refs.size()},
                    {"ngrams", stats.total},
                    {"distinct_ngrams", stats.distinct}}}};
  std::cout << j.dump(2) << '\n';
  return slab::sweep::kExitOk;
}

struct SweepArgs {
  std::string config;
  std::string out;
  bool paper_scale = false;
  std::optional<std::size_t> threads;
};

int sweep(const SweepArgs& a) {
  auto c = slab::sweep::load_sweep_config(a.config);
  if (a.paper_scale) {
    c.params.n_samples = 10000;
    c.params.entropy_samples = 50000;
  }
  if (a.threads) c.params.threads = *a.threads;
  Output out(a.out);
  out.stream() << slab::sweep::kCsvHeader << '\n';
  slab::sweep::run_sweep(c, [&](const slab::sweep::QDPoint& row) {
    out.stream() << slab::sweep::csv_row(row) << '\n';
    out.stream().flush();
  });
  out.close();
  return slab::sweep::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sampling transforms, property checks and quality-diversity sweeps"};
  app.require_subcommand(1);

  PropertiesArgs props;
  auto* cp = app.add_subcommand("check-properties", "Run the three property checkers on random distributions");
  cp->add_option("--spec", props.spec, "Transform spec, e.g. top_k:K=30")->required();
  cp->add_option("--trials", props.trials, "Number of trials");
  cp->add_option("--seed", props.seed, "Base seed");
  cp->add_option("--size", props.size, "Distribution size for Dirichlet draws");
  cp->add_option("--alpha", props.alpha, "Dirichlet concentration");
  cp->add_option("--probs", props.probs, "Fixed distribution as comma-separated probabilities");
  cp->add_option("--out", props.out, "Output JSON file (default stdout)");

  std::string probs;
  double target = 0.0;
  auto* st = app.add_subcommand("solve-temperature", "Find the temperature giving a target entropy");
  st->add_option("--probs", probs, "Comma-separated probabilities")->required();
  st->add_option("--entropy", target, "Target entropy in nats")->required();

  TrainArgs train;
  auto* tl = app.add_subcommand("train-lm", "Train an n-gram model on a text corpus");
  tl->add_option("--corpus", train.corpus, "UTF-8 text, one sentence per line")->required();
  tl->add_option("--out", train.out, "Model file")->required();
  tl->add_option("--order", train.params.order, "N-gram order");
  tl->add_option("--delta", train.params.delta, "Backoff discount");
  tl->add_option("--floor", train.params.floor, "Uniform floor weight");
  tl->add_option("--tokenizer", train.tokenizer, "whitespace or character");
  tl->add_option("--max-vocab", train.max_vocab, "Vocabulary cap including reserved tokens (0: none)");
  tl->add_option("--rechunk", train.rechunk, "Join lines into chunks of at least this many tokens");
  tl->add_flag("--stream", train.stream, "Train on the sentences joined into one sequence");
  tl->add_option("--split", train.split, "Train on the train block of this preset (default, wiki) or none");

  GenerateArgs gen;
  auto* gn = app.add_subcommand("generate", "Sample completions from a model");
  gn->add_option("--model", gen.model, "Trained n-gram model");
  gn->add_option("--replay", gen.replay, "Logits replay file");
  gn->add_option("--spec", gen.spec, "Transform spec")->required();
  gn->add_option("--prompts", gen.prompts, "Prompt source: text lines or JSON-lines records")->required();
  gn->add_option("--prefix-len", gen.prefix_len, "Prefix tokens taken from each prompt");
  gn->add_option("--min-len", gen.min_len, "Minimum total length");
  gn->add_option("--max-len", gen.max_len, "Maximum total length");
  gn->add_option("--n-samples", gen.n_samples, "Number of samples");
  gn->add_option("--seed", gen.seed, "Base seed");
  gn->add_option("--threads", gen.threads, "Worker threads (0: all cores)");
  gn->add_option("--out", gen.out, "Output JSON-lines file (default stdout)");

  EvaluateArgs ev;
  auto* ea = app.add_subcommand("evaluate", "Score a sample file against references");
  ea->add_option("--gen", ev.gen, "Generated samples (JSON-lines)")->required();
  ea->add_option("--refs", ev.refs, "Reference samples (JSON-lines)")->required();
  ea->add_option("--model", ev.model, "Model whose vocabulary encodes text records");
  ea->add_option("--max-n", ev.max_n, "Highest BLEU order");
  ea->add_option("--entropy-n", ev.entropy_n, "N-gram order for entropy");
  ea->add_option("--epsilon", ev.epsilon, "Numerator for zero-match BLEU orders");
  ea->add_option("--threads", ev.threads, "Worker threads (0: all cores)");

  SweepArgs sw;
  auto* sp = app.add_subcommand("sweep", "Run a quality-diversity sweep and write CSV");
  sp->add_option("--config", sw.config, "Sweep config (JSON)")->required();
  sp->add_option("--out", sw.out, "Output CSV (default stdout)");
  sp->add_flag("--paper-scale", sw.paper_scale, "10000 BLEU samples and 50000 entropy samples per config");
  sp->add_option("--threads", sw.threads, "Override the config thread count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return slab::sweep::kExitConfig;
  }

  try {
    if (*cp) return check_properties(props);
    if (*st) return solve_temperature(probs, target);
    if (*tl) return train_lm(train);
    if (*gn) return generate(gen);
    if (*ea) return evaluate(ev);
    if (*sp) return sweep(sw);
  } catch (const slab::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return slab::sweep::exit_code(e.code());
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return slab::sweep::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return slab::sweep::kExitModelData;
  }
  return slab::sweep::kExitOk;
}
