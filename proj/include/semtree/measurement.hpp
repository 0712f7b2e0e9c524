// Copyright 2026 The semtree Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Corpus statistics over chunk trees: pooled normalized sizes, log-binned
// histograms, level-averaged KL against the random-tree ensemble, K*
// selection and tree likelihood rates.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "model_tree.hpp"
#include "numeric.hpp"
#include "scaling.hpp"
#include "semantic_tree.hpp"
#include "size_markov.hpp"
#include "tree_ensemble.hpp"

namespace semtree {

class EmptyLevel : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientTrees : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Log-uniform bins on [lo, hi]; the last bin is closed on the right.
struct LogBinning {
  double lo = 1.0;
  double hi = 1.0;
  std::size_t bins = 1;

  LogBinning() = default;
  LogBinning(double lo_, double hi_, std::size_t bins_) : lo(lo_), hi(hi_), bins(bins_) {
    if (!(lo > 0.0) || hi < lo) throw std::invalid_argument("LogBinning: need 0 < lo <= hi");
    if (bins == 0) throw std::invalid_argument("LogBinning: need at least one bin");
    if (hi == lo) bins = 1;
  }

  bool degenerate() const noexcept { return hi == lo; }

  /// Bin of s, or -1 outside [lo, hi].
  std::ptrdiff_t index(double s) const {
    if (s < lo || s > hi) return -1;
    if (degenerate() || s == hi) return static_cast<std::ptrdiff_t>(bins) - 1;
    const double t = std::log(s / lo) / std::log(hi / lo);
    return std::min(static_cast<std::ptrdiff_t>(t * static_cast<double>(bins)), static_cast<std::ptrdiff_t>(bins) - 1);
  }

  double edge(std::size_t i) const {
    if (degenerate()) return i == 0 ? lo : hi;
    if (i == bins) return hi;
    return lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(bins));
  }
};

struct Histogram {
  LogBinning binning;
  std::vector<double> mass;     // sums to 1
  std::vector<double> density;  // mass / width in s; equals mass for a degenerate binning

  std::vector<double> edges() const {
    std::vector<double> e(binning.bins + 1);
    for (std::size_t i = 0; i <= binning.bins; ++i) e[i] = binning.edge(i);
    return e;
  }
};

/// Normalized histogram over log-uniform bins spanning the sample range.
inline Histogram empirical_histogram(std::span<const double> samples, std::size_t bin_count) {
  if (samples.empty()) throw std::invalid_argument("empirical_histogram: no samples");
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  Histogram h;
  h.binning = LogBinning(*mn, *mx, bin_count);
  h.mass.assign(h.binning.bins, 0.0);
  for (double s : samples) h.mass[static_cast<std::size_t>(h.binning.index(s))] += 1.0;
  const double inv = 1.0 / static_cast<double>(samples.size());
  h.density.resize(h.mass.size());
  for (std::size_t i = 0; i < h.mass.size(); ++i) {
    h.mass[i] *= inv;
    const double w = h.binning.edge(i + 1) - h.binning.edge(i);
    h.density[i] = w > 0.0 ? h.mass[i] / w : h.mass[i];
  }
  return h;
}

struct EmpiricalScaling {
  int level = 1;
  std::vector<double> samples;  // s = n / N, all in (0, 1]
  Histogram histogram;
  std::size_t sample_count() const noexcept { return samples.size(); }
};

/// Nonzero node sizes at depth `level` (root = 1), divided by their tree's N.
inline std::vector<double> level_samples(std::span<const ModelTree> trees, int level) {
  std::vector<double> out;
  for (const auto& t : trees) {
    const auto lv = t.levels();
    const double inv = 1.0 / static_cast<double>(t.root_size());
    for (std::size_t i = 0; i < t.size(); ++i)
      if (lv[i] == level && t[i].size > 0) out.push_back(static_cast<double>(t[i].size) * inv);
  }
  return out;
}

inline EmpiricalScaling pool_normalized_sizes(std::span<const ModelTree> trees, int level, std::size_t bins = 30) {
  if (level < 1) throw std::invalid_argument("pool_normalized_sizes: level must be >= 1");
  EmpiricalScaling e;
  e.level = level;
  e.samples = level_samples(trees, level);
  if (e.samples.empty()) throw EmptyLevel("no tree reaches level " + std::to_string(level));
  e.histogram = empirical_histogram(e.samples, bins);
  return e;
}

// ---------------------------------------------------------------------------
// KL against the ensemble

enum class TheoryKind {
  finite_n,   // exact expected node counts for each tree's N
  continuum,  // N -> infinity scaling function f_L
};

inline std::string_view to_string(TheoryKind t) { return t == TheoryKind::finite_n ? "finite-n" : "continuum"; }

inline TheoryKind theory_kind_from_string(std::string_view s) {
  if (s == "finite-n") return TheoryKind::finite_n;
  if (s == "continuum") return TheoryKind::continuum;
  throw std::invalid_argument("unknown theory kind: " + std::string(s));
}

struct KlOptions {
  std::size_t bins = 20;
  std::size_t min_level_samples = 50;
  int min_level = 2;  // level 1 is the root and carries no information
  int max_level = 0;  // 0: as deep as the data allows
  double floor = 1e-300;
  TheoryKind theory = TheoryKind::finite_n;
  GridSpec grid{};
  unsigned jobs = 1;
};

struct LevelKl {
  int level = 0;
  std::size_t samples = 0;
  double kl = 0.0;
  std::size_t floored_bins = 0;
};

struct KlResult {
  double avg = 0.0;
  std::vector<LevelKl> levels;
  std::size_t floored_bins() const {
    std::size_t n = 0;
    for (const auto& l : levels) n += l.floored_bins;
    return n;
  }
};

/// KL(p || q) over bins with p > 0. q is renormalized over the bins and
/// floored; returns the number of floored bins through `floored`.
inline double kl_divergence(std::span<const double> p, std::span<const double> q, double floor,
                            std::size_t* floored = nullptr) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: size mismatch");
  const double pt = compensated_total(p), qt = compensated_total(q);
  if (!(pt > 0.0)) throw std::invalid_argument("kl_divergence: empty empirical distribution");
  CompensatedSum s;
  std::size_t fl = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    const double pi = p[i] / pt;
    double qi = qt > 0.0 ? q[i] / qt : 0.0;
    if (!(qi >= floor)) {
      qi = floor;
      ++fl;
    }
    s.add(pi * std::log(pi / qi));
  }
  if (floored) *floored = fl;
  return std::max(0.0, s.value());
}

/// Per-level empirical bin counts for a fixed tree set. Levels and bins are
/// frozen at construction so bootstrap resamples share them.
class EmpiricalLevels {
 public:
  EmpiricalLevels(std::span<const ModelTree> trees, const KlOptions& opts) {
    if (trees.empty()) throw InsufficientTrees("no trees");
    root_sizes_.reserve(trees.size());
    std::vector<std::vector<int>> depth(trees.size());
    int deepest = 1;
    for (std::size_t t = 0; t < trees.size(); ++t) {
      root_sizes_.push_back(trees[t].root_size());
      depth[t] = trees[t].levels();
      for (int d : depth[t]) deepest = std::max(deepest, d);
    }
    const int top = opts.max_level > 0 ? std::min(opts.max_level, deepest) : deepest;
    for (int level = std::max(1, opts.min_level); level <= top; ++level) {
      std::vector<double> all;
      std::vector<std::vector<double>> per_tree(trees.size());
      for (std::size_t t = 0; t < trees.size(); ++t) {
        const double inv = 1.0 / static_cast<double>(trees[t].root_size());
        for (std::size_t i = 0; i < trees[t].size(); ++i)
          if (depth[t][i] == level && trees[t][i].size > 0) per_tree[t].push_back(static_cast<double>(trees[t][i].size) * inv);
        all.insert(all.end(), per_tree[t].begin(), per_tree[t].end());
      }
      if (all.size() < opts.min_level_samples || all.empty()) continue;
      const auto [mn, mx] = std::minmax_element(all.begin(), all.end());
      Level lv;
      lv.level = level;
      lv.binning = LogBinning(*mn, *mx, opts.bins);
      lv.counts.assign(trees.size(), std::vector<double>(lv.binning.bins, 0.0));
      for (std::size_t t = 0; t < trees.size(); ++t)
        for (double s : per_tree[t]) lv.counts[t][static_cast<std::size_t>(lv.binning.index(s))] += 1.0;
      levels_.push_back(std::move(lv));
    }
  }

  struct Level {
    int level = 0;
    LogBinning binning;
    std::vector<std::vector<double>> counts;  // [tree][bin]
  };

  const std::vector<Level>& levels() const noexcept { return levels_; }
  const std::vector<std::uint64_t>& root_sizes() const noexcept { return root_sizes_; }
  std::size_t tree_count() const noexcept { return root_sizes_.size(); }
  int max_level() const noexcept { return levels_.empty() ? 1 : levels_.back().level; }

  /// Pooled counts for tree multiplicities `weights` (all ones if empty).
  std::vector<double> pooled(std::size_t li, std::span<const double> weights = {}) const {
    const auto& lv = levels_.at(li);
    std::vector<double> out(lv.binning.bins, 0.0);
    for (std::size_t t = 0; t < lv.counts.size(); ++t) {
      const double w = weights.empty() ? 1.0 : weights[t];
      if (w == 0.0) continue;
      for (std::size_t b = 0; b < out.size(); ++b) out[b] += w * lv.counts[t][b];
    }
    return out;
  }

 private:
  std::vector<Level> levels_;
  std::vector<std::uint64_t> root_sizes_;
};

namespace detail {

/// Expected counts of nonzero-size nodes at each depth 1..max_level for root N
/// under branching factor K, binned by s = n/N.
inline std::vector<std::vector<double>> finite_n_bin_counts(std::uint64_t n, int k,
                                                            const std::vector<EmpiricalLevels::Level>& levels) {
  std::vector<std::vector<double>> out(levels.size());
  if (levels.empty()) return out;
  LevelPropagator prop(n, k);
  std::vector<double> prev_absorbed(n + 1, 0.0);
  std::size_t li = 0;
  const double inv = 1.0 / static_cast<double>(n);
  for (int level = 1; level <= levels.back().level; ++level) {
    if (level > 1) {
      prev_absorbed = prop.absorbed();
      prop.step(static_cast<double>(k));
    }
    while (li < levels.size() && levels[li].level < level) ++li;
    if (li >= levels.size() || levels[li].level != level) continue;
    const auto& b = levels[li].binning;
    auto& counts = out[li];
    counts.assign(b.bins, 0.0);
    for (std::uint64_t j = 1; j <= n; ++j) {
      const double present = prop.survived()[j] + (prop.absorbed()[j] - (level > 1 ? prev_absorbed[j] : 0.0));
      if (present <= 0.0) continue;
      const auto idx = b.index(static_cast<double>(j) * inv);
      if (idx >= 0) counts[static_cast<std::size_t>(idx)] += present;
    }
  }
  return out;
}

}  // namespace detail

/// Theory bin masses for one branching factor over an EmpiricalLevels layout.
class TheoryLevels {
 public:
  TheoryLevels(const EmpiricalLevels& emp, int k, const KlOptions& opts) : k_(k), kind_(opts.theory) {
    const auto& levels = emp.levels();
    if (kind_ == TheoryKind::continuum) {
      continuum_.resize(levels.size());
      for (std::size_t li = 0; li < levels.size(); ++li) {
        const auto& b = levels[li].binning;
        auto& q = continuum_[li];
        q.assign(b.bins, 0.0);
        if (levels[li].level == 1) {
          q[static_cast<std::size_t>(b.index(1.0) >= 0 ? b.index(1.0) : 0)] = b.index(1.0) >= 0 ? 1.0 : 0.0;
          continue;
        }
        const auto curve = scaling_function(k, levels[li].level, opts.grid, opts.jobs);
        for (std::size_t i = 0; i < b.bins; ++i)
          q[i] = std::max(0.0, curve.cdf(b.edge(i + 1)) - curve.cdf(b.degenerate() ? 0.0 : b.edge(i)));
      }
      return;
    }
    std::vector<std::uint64_t> distinct(emp.root_sizes());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::vector<std::vector<std::vector<double>>> table(distinct.size());
    auto work = [&](std::size_t begin, std::size_t stride) {
      for (std::size_t i = begin; i < distinct.size(); i += stride)
        table[i] = detail::finite_n_bin_counts(distinct[i], k, levels);
    };
    const unsigned jobs = std::max(1u, std::min<unsigned>(opts.jobs, static_cast<unsigned>(distinct.size())));
    if (jobs == 1) {
      work(0, 1);
    } else {
      std::vector<std::jthread> pool;
      for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(work, j, jobs);
    }
    for (std::size_t i = 0; i < distinct.size(); ++i) by_size_.emplace(distinct[i], std::move(table[i]));
  }

  int k() const noexcept { return k_; }

  /// Bin masses at level index li for the tree mixture with `weights`.
  std::vector<double> mixture(const EmpiricalLevels& emp, std::size_t li, std::span<const double> weights = {}) const {
    if (kind_ == TheoryKind::continuum) return continuum_.at(li);
    std::vector<double> out(emp.levels().at(li).binning.bins, 0.0);
    const auto& sizes = emp.root_sizes();
    for (std::size_t t = 0; t < sizes.size(); ++t) {
      const double w = weights.empty() ? 1.0 : weights[t];
      if (w == 0.0) continue;
      const auto& q = by_size_.at(sizes[t])[li];
      for (std::size_t b = 0; b < out.size(); ++b) out[b] += w * q[b];
    }
    return out;
  }

 private:
  int k_;
  TheoryKind kind_;
  std::map<std::uint64_t, std::vector<std::vector<double>>> by_size_;
  std::vector<std::vector<double>> continuum_;
};

/// Level-averaged KL(empirical || theory).
inline KlResult avg_kl(const EmpiricalLevels& emp, const TheoryLevels& theory, const KlOptions& opts,
                       std::span<const double> weights = {}) {
  KlResult r;
  CompensatedSum s;
  for (std::size_t li = 0; li < emp.levels().size(); ++li) {
    const auto p = emp.pooled(li, weights);
    const double total = compensated_total(p);
    if (total <= 0.0) continue;
    LevelKl l;
    l.level = emp.levels()[li].level;
    l.samples = static_cast<std::size_t>(std::llround(total));
    l.kl = kl_divergence(p, theory.mixture(emp, li, weights), opts.floor, &l.floored_bins);
    s.add(l.kl);
    r.levels.push_back(l);
  }
  if (r.levels.empty()) throw EmptyLevel("avg_kl: no level has at least " + std::to_string(opts.min_level_samples) + " samples");
  r.avg = s.value() / static_cast<double>(r.levels.size());
  return r;
}

struct KScore {
  int k = 0;
  double avg_kl = 0.0;
  std::vector<LevelKl> levels;
  std::size_t floored_bins = 0;
};

struct CorpusFit {
  std::string corpus_id;
  std::vector<KScore> scores;  // ascending K
  int k_star = 0;
  std::size_t bins = 0;
  std::size_t min_level_samples = 0;
  TheoryKind theory = TheoryKind::finite_n;

  std::vector<int> levels_used() const {
    std::vector<int> out;
    for (const auto& s : scores)
      for (const auto& l : s.levels)
        if (std::find(out.begin(), out.end(), l.level) == out.end()) out.push_back(l.level);
    std::sort(out.begin(), out.end());
    return out;
  }
};

/// Argmin over the score table; exact ties go to the smaller K.
inline int argmin_k(const std::vector<KScore>& scores) {
  if (scores.empty()) throw std::invalid_argument("argmin_k: empty score table");
  const KScore* best = &scores.front();
  for (const auto& s : scores)
    if (s.avg_kl < best->avg_kl || (s.avg_kl == best->avg_kl && s.k < best->k)) best = &s;
  return best->k;
}

namespace detail {

inline void require_trees(std::size_t n, std::size_t min_trees, const std::string& what) {
  if (n < min_trees)
    throw InsufficientTrees(what + ": " + std::to_string(n) + " trees, need at least " + std::to_string(min_trees));
}

inline std::vector<int> k_values(int k_min, int k_max) {
  if (k_min < 2 || k_max < k_min) throw std::invalid_argument("K range must satisfy 2 <= k_min <= k_max");
  std::vector<int> ks;
  for (int k = k_min; k <= k_max; ++k) ks.push_back(k);
  return ks;
}

}  // namespace detail

/// One tree set scored against the ensemble at each K in [k_min, k_max].
inline CorpusFit select_k_star(std::span<const ModelTree> trees, int k_min, int k_max, const KlOptions& opts = {},
                               std::size_t min_trees = 10, std::string corpus_id = {}) {
  detail::require_trees(trees.size(), min_trees, corpus_id.empty() ? "select_k_star" : corpus_id);
  const EmpiricalLevels emp(trees, opts);
  CorpusFit fit{std::move(corpus_id), {}, 0, opts.bins, opts.min_level_samples, opts.theory};
  for (int k : detail::k_values(k_min, k_max)) {
    const TheoryLevels th(emp, k, opts);
    const auto r = avg_kl(emp, th, opts);
    fit.scores.push_back({k, r.avg, r.levels, r.floored_bins()});
  }
  fit.k_star = argmin_k(fit.scores);
  return fit;
}

/// Trees chunked separately at each K, each compared with the theory at the
/// same K.
inline CorpusFit select_k_star(const std::map<int, std::vector<ModelTree>>& trees_by_k, const KlOptions& opts = {},
                               std::size_t min_trees = 10, std::string corpus_id = {}) {
  if (trees_by_k.empty()) throw InsufficientTrees("select_k_star: no candidate K");
  CorpusFit fit{std::move(corpus_id), {}, 0, opts.bins, opts.min_level_samples, opts.theory};
  for (const auto& [k, trees] : trees_by_k) {
    detail::require_trees(trees.size(), min_trees, "K=" + std::to_string(k));
    const EmpiricalLevels emp(trees, opts);
    const TheoryLevels th(emp, k, opts);
    const auto r = avg_kl(emp, th, opts);
    fit.scores.push_back({k, r.avg, r.levels, r.floored_bins()});
  }
  fit.k_star = argmin_k(fit.scores);
  return fit;
}

struct BootstrapResult {
  std::size_t resamples = 0;
  std::map<int, std::size_t> k_star_counts;
  double fraction(int k) const {
    const auto it = k_star_counts.find(k);
    return resamples == 0 || it == k_star_counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(resamples);
  }
};

/// Resamples trees with replacement and records K* for each resample. Levels,
/// bins and theory tables come from the full set.
inline BootstrapResult bootstrap_k_star(std::span<const ModelTree> trees, int k_min, int k_max, std::size_t resamples,
                                        std::uint64_t seed, const KlOptions& opts = {}, std::size_t min_trees = 10) {
  detail::require_trees(trees.size(), min_trees, "bootstrap_k_star");
  const EmpiricalLevels emp(trees, opts);
  std::vector<TheoryLevels> theories;
  for (int k : detail::k_values(k_min, k_max)) theories.emplace_back(emp, k, opts);
  BootstrapResult out;
  out.resamples = resamples;
  std::vector<double> w(trees.size());
  for (std::size_t r = 0; r < resamples; ++r) {
    std::mt19937_64 rng(derive_seed(seed, r));
    std::uniform_int_distribution<std::size_t> pick(0, trees.size() - 1);
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t i = 0; i < trees.size(); ++i) w[pick(rng)] += 1.0;
    std::vector<KScore> scores;
    for (const auto& th : theories) scores.push_back({th.k(), avg_kl(emp, th, opts, w).avg, {}, 0});
    ++out.k_star_counts[argmin_k(scores)];
  }
  return out;
}

/// CSV: corpus_id,k,avg_kl_nats,levels,floored_bins,bins,theory,is_k_star
inline void write_score_table_csv(std::ostream& os, std::span<const CorpusFit> fits) {
  os << "corpus_id,k,avg_kl_nats,levels,floored_bins,bins,theory,is_k_star\n";
  const auto old = os.precision(10);
  for (const auto& f : fits)
    for (const auto& s : f.scores)
      os << f.corpus_id << ',' << s.k << ',' << s.avg_kl << ',' << s.levels.size() << ',' << s.floored_bins << ','
         << f.bins << ',' << to_string(f.theory) << ',' << (s.k == f.k_star ? 1 : 0) << '\n';
  os.precision(old);
}

/// CSV: level,bin_lo,bin_hi,mass,density
inline void write_histogram_csv(std::ostream& os, std::span<const EmpiricalScaling> levels) {
  os << "level,bin_lo,bin_hi,mass,density\n";
  const auto old = os.precision(12);
  for (const auto& e : levels)
    for (std::size_t i = 0; i < e.histogram.mass.size(); ++i)
      os << e.level << ',' << e.histogram.binning.edge(i) << ',' << e.histogram.binning.edge(i + 1) << ','
         << e.histogram.mass[i] << ',' << e.histogram.density[i] << '\n';
  os.precision(old);
}

// ---------------------------------------------------------------------------
// Tree likelihood rates

/// -log P(T) / N in nats per token.
inline double tree_rate(const ModelTree& tree, int k) {
  return 0.0 - tree_log_prob(tree, k).value / static_cast<double>(tree.root_size());
}

inline double tree_rate(const SemanticTree& tree, int k) { return tree_rate(to_model_sizes(tree), k); }

}  // namespace semtree
