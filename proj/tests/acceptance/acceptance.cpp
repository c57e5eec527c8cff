// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "metrics_oracle.hpp"
#include "slab/slab.hpp"
#include "test_support.hpp"

namespace {

using namespace slab;
using metrics::Sequence;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (detail.tellp() > 0) detail << "; ";
      detail << "failed: " << what;
      pass = false;
    }
  }
};

int g_failures = 0;

void report(int number, const std::string& title, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.require(false, std::string("exception ") + e.what());
  }
  const double secs = seconds_since(t0);
  if (!o.pass) ++g_failures;
  std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << number << " (" << title << ", "
            << std::fixed << std::setprecision(1) << secs << " s): " << o.detail.str() << std::endl;
  std::cout.unsetf(std::ios::fixed);
  std::cout << std::setprecision(6);
}

double draw(std::mt19937_64& gen, double lo, double hi) { return testing::uniform(gen, lo, hi); }

std::size_t draw_count(std::mt19937_64& gen, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(gen);
}

// (0, 1]
double draw_unit(std::mt19937_64& gen) { return 1.0 - draw(gen, 0.0, 1.0); }

// ------------------------------------------------------------ criterion 1

void order_checked_suite(Outcome& o) {
  const auto t0 = Clock::now();
  const auto suite = testing::random_suite(1000, 101);
  std::mt19937_64 gen(102);
  std::map<std::string, int> failures;
  int reports = 0;
  for (const auto& c : suite) {
    const std::size_t n = c.size;
    const TransformSpec specs[] = {
        TopK{draw_count(gen, 1, n)},
        Nucleus{draw_unit(gen)},
        Tempered{draw_unit(gen)},
        TemperedTopK{draw_count(gen, 1, n), draw_unit(gen)},
    };
    for (const auto& spec : specs) {
      Rng rng(gen());
      const auto r = full_report(spec, c.dist, rng);
      ++reports;
      if (!r.all_hold()) ++failures[std::string(family_name(spec))];
    }
  }
  o.detail << reports << " reports over 1000 distributions, failures:";
  for (const char* f : {"top_k", "nucleus", "tempered", "tempered_top_k"}) {
    o.detail << ' ' << f << '=' << failures[f];
    o.require(failures[f] == 0, std::string(f) + " property failure");
  }
  o.require(seconds_since(t0) <= 60.0, "runtime above 60 s");
}

// ------------------------------------------------------------ criterion 2

void satisfying_set(Outcome& o) {
  const auto suite = testing::random_suite(1000, 201);
  std::mt19937_64 gen(202);
  int top_k_fail = 0, max_entropy_fail = 0, mask_slope_fail = 0;
  for (const auto& c : suite) {
    const std::size_t n = c.size;
    Rng rng(gen());
    if (!full_report(RandomTopK{draw_count(gen, 1, n - 1)}, c.dist, rng).all_hold()) ++top_k_fail;
    const double ceiling = draw(gen, 0.0, std::log(static_cast<double>(n)));
    if (ceiling > 0.0 && !full_report(MaxEntropy{ceiling}, c.dist, rng).all_hold()) ++max_entropy_fail;
    if (!full_report(RandomMask{draw_unit(gen)}, c.dist, rng).slope_preserved) ++mask_slope_fail;
  }
  int order_violations = 0;
  std::mt19937_64 dist_gen(203);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto d = from_probs(testing::dirichlet(64, 1.0, dist_gen));
    Rng rng(derive_seed(204, static_cast<std::uint64_t>(trial)));
    if (!full_report(RandomMask{0.5}, d, rng).order_preserved) ++order_violations;
  }
  o.detail << "random_top_k failures=" << top_k_fail << " max_entropy failures=" << max_entropy_fail
           << " random_mask slope failures=" << mask_slope_fail
           << " random_mask R=0.5 order violations=" << order_violations << "/1000";
  o.require(top_k_fail == 0, "random_top_k");
  o.require(max_entropy_fail == 0, "max_entropy");
  o.require(mask_slope_fail == 0, "random_mask slope");
  o.require(order_violations >= 1, "random_mask never broke order");
}

// ------------------------------------------------------------ criterion 3

void violating_set(Outcome& o) {
  const auto suite = testing::random_suite(100, 301);
  std::mt19937_64 gen(302);
  int target_fail = 0;
  for (const auto& c : suite) {
    const double h = entropy(c.dist);
    const auto probs = c.dist.probs();
    const auto support = std::count_if(probs.begin(), probs.end(), [](double v) { return v > 0.0; });
    const double h_max = std::log(static_cast<double>(support));
    const double e = h + draw(gen, 0.1, 0.9) * (h_max - h);
    Rng rng(1);
    if (!full_report(TargetEntropy{e}, c.dist, rng).entropy_reduced) ++target_fail;
  }
  const auto wide = testing::random_suite(1000, 303, 8);
  int slope_broken = 0;
  for (std::size_t i = 0; i < wide.size(); ++i) {
    Rng rng(derive_seed(304, i));
    const auto r = full_report(NoisedTopK{8, 0.1}, wide[i].dist, rng);
    if (r.slope_fit.max_residual > kSlopeTolerance) ++slope_broken;
  }
  o.detail << "target_entropy E>H fails entropy reduction " << target_fail
           << "/100; noised_top_k K=8 W=0.1 slope residual > 1e-8 in " << slope_broken << "/1000";
  o.require(target_fail == 100, "target_entropy");
  o.require(slope_broken >= 950, "noised_top_k slope");
}

// ------------------------------------------------------------ criterion 4

void lemma_suites(Outcome& o) {
  int truncation_checked = 0, truncation_fail = 0, skipped = 0;
  for (const auto& c : testing::random_suite(1200, 401)) {
    if (truncation_checked == 1000) break;
    if (!(c.dist.probs().back() > 0.0)) {
      ++skipped;
      continue;
    }
    ++truncation_checked;
    if (!verify_truncation_lemma(c.dist)) ++truncation_fail;
  }
  std::mt19937_64 gen(402);
  int temperature_fail = 0;
  for (const auto& c : testing::random_suite(1000, 403)) {
    std::vector<double> grid(8);
    do {
      for (double& t : grid) t = draw(gen, 0.05, 2.0);
      std::sort(grid.begin(), grid.end());
    } while (std::adjacent_find(grid.begin(), grid.end()) != grid.end());
    if (!verify_temperature_monotonicity(c.dist, grid)) ++temperature_fail;
  }
  o.detail << "truncation failures " << truncation_fail << "/" << truncation_checked << " (" << skipped
           << " draws with zero tail skipped); temperature failures " << temperature_fail << "/1000";
  o.require(truncation_checked == 1000, "fewer than 1000 truncation cases");
  o.require(truncation_fail == 0, "truncation lemma");
  o.require(temperature_fail == 0, "temperature lemma");
}

// ------------------------------------------------------------ criterion 5

// Independent oracle: entropy of p^(1/t) by max-shifted summation in long double.
double oracle_tempered_entropy(const SortedDistribution& d, double t) {
  std::vector<long double> l;
  for (double p : d.probs()) {
    if (p > 0.0) l.push_back(std::log(static_cast<long double>(p)) / t);
  }
  const long double m = *std::max_element(l.begin(), l.end());
  long double z = 0.0L, s = 0.0L;
  for (auto v : l) {
    const long double w = std::exp(v - m);
    z += w;
    s += w * (v - m);
  }
  return static_cast<double>(std::log(z) - s / z);
}

void solver_suite(Outcome& o) {
  std::mt19937_64 gen(502);
  double worst_gap = 0.0;
  int max_iterations = 0, monotone_fail = 0;
  for (const auto& c : testing::random_suite(1000, 501)) {
    const auto range = attainable_entropy_range(c.dist);
    const double span = range.max - range.min;
    const double e = range.min + draw(gen, 0.001, 0.999) * span;
    const auto r = solve_temperature(c.dist, e);
    worst_gap = std::max(worst_gap, std::abs(oracle_tempered_entropy(c.dist, r.t_star) - e));
    max_iterations = std::max(max_iterations, r.iterations);
    double e1 = range.min + draw(gen, 0.001, 0.999) * span;
    double e2 = range.min + draw(gen, 0.001, 0.999) * span;
    if (e1 > e2) std::swap(e1, e2);
    if (e2 - e1 < 1e-4) e2 = std::min(e1 + 1e-4, range.min + 0.9995 * span);
    if (e1 < e2 && !(solve_temperature(c.dist, e1).t_star < solve_temperature(c.dist, e2).t_star)) {
      ++monotone_fail;
    }
  }
  o.detail << "worst |H - E| = " << worst_gap << " nats, max iterations " << max_iterations
           << ", monotonicity failures " << monotone_fail << "/1000";
  o.require(worst_gap <= 1e-6, "entropy tolerance");
  o.require(max_iterations <= 200, "iteration cap");
  o.require(monotone_fail == 0, "t*(E) not increasing");
}

// ------------------------------------------------------------ criterion 6

std::vector<Sequence> toy_batch(std::mt19937_64& gen, int vocab) {
  std::vector<Sequence> batch(draw_count(gen, 2, 10));
  for (auto& s : batch) {
    s.resize(draw_count(gen, 1, 12));
    for (auto& t : s) t = static_cast<TokenId>(draw_count(gen, 0, static_cast<std::size_t>(vocab - 1)));
  }
  return batch;
}

void metric_oracles(Outcome& o) {
  std::mt19937_64 gen(601);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int vocab = 3 + trial % 6;
    const auto g = toy_batch(gen, vocab);
    const auto r = toy_batch(gen, vocab);
    worst = std::max(worst, std::abs(metrics::corpus_bleu(g, r) - metrics::testing::oracle_corpus_bleu(g, r, 4, 0.1)));
    worst = std::max(worst, std::abs(metrics::self_bleu(g) - metrics::testing::oracle_self_bleu(g, 4, 0.1)));
    worst = std::max(worst, std::abs(metrics::ngram_entropy(g, 2) - metrics::testing::oracle_ngram_entropy(g, 2)));
    if (std::any_of(g.begin(), g.end(), [](const Sequence& s) { return s.size() >= 3; })) {
      worst = std::max(worst, std::abs(metrics::ngram_entropy(g, 3) - metrics::testing::oracle_ngram_entropy(g, 3)));
    }
  }
  const std::vector<Sequence> same(6, Sequence{4, 7, 1, 9, 9, 2});
  const std::vector<Sequence> left{{1, 2, 3, 4}, {2, 3, 1}}, right{{5, 6, 7, 8}, {8, 7}};
  const std::vector<Sequence> one_gram{{3, 3, 3, 3, 3}};
  const double self = metrics::self_bleu(same);
  const double disjoint = metrics::corpus_bleu(left, right);
  const double single = metrics::ngram_entropy(one_gram, 3);
  o.detail << "worst oracle gap " << worst << " over 50 batches; self-BLEU(identical)=" << self
           << " corpus-BLEU(disjoint)=" << disjoint << " entropy(single n-gram)=" << single;
  o.require(worst <= 1e-12, "oracle gap");
  o.require(self == 1.0 && disjoint == 0.0 && single == 0.0, "boundary identity");
}

// ------------------------------------------------------------ Q-D helpers

// Spearman correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto i, auto j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return saa > 0.0 && sbb > 0.0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

constexpr double kMatchTolerance = 0.02;

// Quality as a function of self-BLEU: piecewise linear through the points,
// extended flat by the match tolerance beyond either end.
struct Curve {
  std::vector<std::pair<double, double>> points;  // (self-BLEU, corpus-BLEU), sorted

  explicit Curve(std::vector<std::pair<double, double>> p) : points(std::move(p)) {
    std::sort(points.begin(), points.end());
  }
  double lo() const { return points.front().first - kMatchTolerance; }
  double hi() const { return points.back().first + kMatchTolerance; }
  double at(double x) const {
    if (x <= points.front().first) return points.front().second;
    if (x >= points.back().first) return points.back().second;
    auto it = std::lower_bound(points.begin(), points.end(), std::make_pair(x, -1.0));
    const auto [x1, y1] = *it;
    const auto [x0, y0] = *std::prev(it);
    return x1 == x0 ? y1 : y0 + (y1 - y0) * (x - x0) / (x1 - x0);
  }
};

// Self-BLEU levels on a 0.02 grid covering the common domain of the curves.
std::vector<double> matched_levels(const std::vector<const Curve*>& curves) {
  double lo = -1e9, hi = 1e9;
  for (const Curve* c : curves) {
    lo = std::max(lo, c->lo());
    hi = std::min(hi, c->hi());
  }
  std::vector<double> levels;
  if (lo > hi) return levels;
  for (double x = lo; x < hi; x += 0.02) levels.push_back(x);
  levels.push_back(hi);
  return levels;
}

struct Family {
  std::string name;
  std::vector<std::string> grid;  // ordered loose to greedy
};

// rows[seed][spec] for one family set.
using SweepRows = std::vector<std::map<std::string, sweep::QDPoint>>;

SweepRows run_seeds(const lm::LanguageModel& model, const sweep::EvalData& data, const std::vector<Family>& families,
                    const sweep::SweepParams& base, int seeds) {
  SweepRows out;
  for (int s = 0; s < seeds; ++s) {
    auto p = base;
    p.seed = base.seed + static_cast<std::uint64_t>(s);
    p.grid.clear();
    for (const auto& f : families) {
      for (const auto& g : f.grid) p.grid.push_back(parse_transform_spec(g));
    }
    std::map<std::string, sweep::QDPoint> rows;
    for (const auto& spec : p.grid) rows[to_string(spec)] = sweep::run_config(model, data, spec, p);
    out.push_back(std::move(rows));
  }
  return out;
}

Curve family_curve(const Family& f, const std::map<std::string, sweep::QDPoint>& rows) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& g : f.grid) pts.emplace_back(rows.at(g).diversity_self_bleu, rows.at(g).quality_corpus_bleu);
  return Curve(std::move(pts));
}

struct Workbench {
  sweep::Workspace ws;
  sweep::EvalData data;
  sweep::SweepParams params;
};

sweep::SweepConfig qd_config() {
  sweep::SweepConfig c;
  c.corpus_path = SLAB_DATA_DIR "/kjv.txt";
  c.rechunk_min_tokens = 50;
  c.max_vocab = 2000;
  c.train_as_stream = true;
  c.split = {0.75, 0.15, 0.10};
  c.train = {4, 0.4, 1e-3};
  c.params.n_samples = 1000;
  c.params.prefix_len = 10;
  c.params.min_len = 40;
  c.params.max_len = 50;
  c.params.seed = 1000;
  c.params.threads = 0;
  return c;
}

Workbench open_bench() {
  const auto c = qd_config();
  Workbench b{sweep::open_workspace(c), {}, c.params};
  b.data = sweep::make_eval_data(b.ws.splits.validation, b.ws.splits.test, c.params);
  return b;
}

// ------------------------------------------------------------ criterion 7

void qd_tradeoff(Outcome& o, const Workbench& b) {
  const std::vector<Family> families = {
      {"top_k", {"top_k:K=500", "top_k:K=100", "top_k:K=30", "top_k:K=15", "top_k:K=5"}},
      {"nucleus", {"nucleus:P=0.95", "nucleus:P=0.9", "nucleus:P=0.8", "nucleus:P=0.65", "nucleus:P=0.5"}},
      {"tempered", {"tempered:T=1", "tempered:T=0.9", "tempered:T=0.85", "tempered:T=0.8", "tempered:T=0.7"}},
  };
  constexpr int kSeeds = 5;
  const auto rows = run_seeds(*b.ws.model, b.data, families, b.params, kSeeds);

  double worst_rho = 1.0;
  const std::vector<double> greediness{0, 1, 2, 3, 4};
  for (const auto& f : families) {
    for (int s = 0; s < kSeeds; ++s) {
      std::vector<double> self, neg_entropy;
      for (const auto& g : f.grid) {
        self.push_back(rows[s].at(g).diversity_self_bleu);
        neg_entropy.push_back(-rows[s].at(g).diversity_ngram_entropy);
      }
      worst_rho = std::min({worst_rho, spearman(greediness, self), spearman(greediness, neg_entropy)});
    }
  }

  // Seed-mean curves and per-family seed noise.
  std::vector<Curve> curves;
  double sigma = 0.0;
  for (const auto& f : families) {
    std::vector<std::pair<double, double>> mean_pts;
    double sum_var = 0.0;
    for (const auto& g : f.grid) {
      double ms = 0.0, mq = 0.0;
      for (int s = 0; s < kSeeds; ++s) {
        ms += rows[s].at(g).diversity_self_bleu / kSeeds;
        mq += rows[s].at(g).quality_corpus_bleu / kSeeds;
      }
      double var = 0.0;
      for (int s = 0; s < kSeeds; ++s) var += std::pow(rows[s].at(g).quality_corpus_bleu - mq, 2) / (kSeeds - 1);
      sum_var += var;
      mean_pts.emplace_back(ms, mq);
    }
    const double family_sigma = std::sqrt(sum_var / static_cast<double>(f.grid.size()));
    o.detail << f.name << " sigma=" << family_sigma << "; ";
    sigma = std::max(sigma, family_sigma);
    curves.emplace_back(std::move(mean_pts));
  }
  const auto levels = matched_levels({&curves[0], &curves[1], &curves[2]});
  double worst_gap = 0.0, worst_level = 0.0;
  for (double x : levels) {
    const double q[] = {curves[0].at(x), curves[1].at(x), curves[2].at(x)};
    const double gap = *std::max_element(q, q + 3) - *std::min_element(q, q + 3);
    if (gap > worst_gap) {
      worst_gap = gap;
      worst_level = x;
    }
  }
  o.detail << "min Spearman rho " << worst_rho << " over " << families.size() * kSeeds << " family sweeps; "
           << levels.size() << " matched self-BLEU levels, worst cross-family corpus-BLEU gap " << worst_gap
           << " at self-BLEU " << worst_level << " vs threshold 3*sigma = " << 3 * sigma;
  for (std::size_t i = 0; i < families.size(); ++i) {
    o.detail << "; " << families[i].name << " curve";
    for (const auto& [x, y] : curves[i].points) o.detail << " (" << x << ", " << y << ")";
  }
  o.require(worst_rho >= 0.9, "monotone traversal");
  o.require(!levels.empty(), "no common self-BLEU range");
  o.require(worst_gap <= 3 * sigma, "curves do not interleave");
}

// ------------------------------------------------------------ criterion 8

void mask_ablation(Outcome& o, const Workbench& b) {
  const std::vector<Family> families = {
      {"random_mask", {"random_mask:R=0.02", "random_mask:R=0.05", "random_mask:R=0.1", "random_mask:R=0.2",
                       "random_mask:R=0.3"}},
      {"random_mask_all", {"random_mask_all:R=0.3", "random_mask_all:R=0.2", "random_mask_all:R=0.1",
                           "random_mask_all:R=0.05", "random_mask_all:R=0.02"}},
  };
  constexpr int kSeeds = 5;
  auto params = b.params;
  params.seed = 2000;
  const auto rows = run_seeds(*b.ws.model, b.data, families, params, kSeeds);
  int wins = 0;
  o.detail << "mean corpus-BLEU(mask_all - mask) per seed:";
  for (int s = 0; s < kSeeds; ++s) {
    const Curve mask = family_curve(families[0], rows[s]);
    const Curve all = family_curve(families[1], rows[s]);
    const auto levels = matched_levels({&mask, &all});
    if (levels.empty()) {
      o.detail << " none";
      continue;
    }
    double diff = 0.0;
    for (double x : levels) diff += (all.at(x) - mask.at(x)) / static_cast<double>(levels.size());
    o.detail << ' ' << diff << " (" << levels.size() << " levels)";
    if (diff <= 0.0) ++wins;
  }
  o.detail << "; mask_all <= mask in " << wins << "/5 seeds";
  o.require(wins >= 4, "mask_all not degraded in 4 of 5 seeds");
}

// ------------------------------------------------------------ criterion 9

void determinism(Outcome& o) {
  auto c = qd_config();
  c.params.n_samples = 200;
  for (const char* s : {"top_k:K=30", "nucleus:P=0.9", "tempered:T=0.85", "tempered_top_k:K=500,T=0.8",
                        "random_mask:R=0.5", "random_mask_all:R=0.1", "noised_top_k:K=50,W=0.005",
                        "random_top_k:M=90"}) {
    c.params.grid.push_back(parse_transform_spec(s));
  }
  const auto dir = std::filesystem::temp_directory_path() / "slab_acceptance";
  std::filesystem::create_directories(dir);
  std::vector<std::string> texts;
  for (std::size_t threads : {1, 1, 8}) {
    c.params.threads = threads;
    const auto path = dir / ("qd_" + std::to_string(texts.size()) + ".csv");
    sweep::export_table(sweep::run_sweep(c), path.string());
    std::ifstream in(path, std::ios::binary);
    texts.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  std::filesystem::remove_all(dir);
  o.detail << texts[0].size() << "-byte CSV, " << c.params.grid.size() + 1
           << " rows; run1 == run2: " << (texts[0] == texts[1]) << ", threads 1 == 8: " << (texts[0] == texts[2]);
  o.require(texts[0] == texts[1], "reruns differ");
  o.require(texts[0] == texts[2], "thread counts differ");
}

}  // namespace

int main() {
  std::cout << std::setprecision(6);
  std::cout << "hardware threads: " << std::thread::hardware_concurrency() << std::endl;
  report(1, "order-preserving transforms pass all properties", order_checked_suite);
  report(2, "property-satisfying set", satisfying_set);
  report(3, "property-violating set", violating_set);
  report(4, "truncation and temperature lemmas", lemma_suites);
  report(5, "temperature solver", solver_suite);
  report(6, "metric oracles", metric_oracles);

  const auto t0 = Clock::now();
  const Workbench bench = open_bench();
  const double setup = seconds_since(t0);
  std::cout << "model: 4-gram on kjv.txt, vocab " << bench.ws.model->vocab_size() << ", splits "
            << bench.ws.splits.train.size() << "/" << bench.ws.splits.validation.size() << "/"
            << bench.ws.splits.test.size() << " chunks, setup " << setup << " s" << std::endl;
  report(7, "quality-diversity traversal and interleaving", [&](Outcome& o) {
    const auto start = Clock::now();
    qd_tradeoff(o, bench);
    const double total = seconds_since(start) + setup;
    o.detail << "; runtime incl. training " << total << " s";
    o.require(total <= 600.0, "runtime above 10 min");
  });
  report(8, "mask-all ablation", [&](Outcome& o) { mask_ablation(o, bench); });
  report(9, "determinism", determinism);
  return g_failures == 0 ? 0 : 1;
}
