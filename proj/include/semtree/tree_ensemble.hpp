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

// Sampling, enumeration and scoring of whole trees, and the ensemble entropy
// H(N) computed three independent ways.
//
// Likelihood convention: every node that samples a composition contributes
// 1/Z_K(size), including nodes whose sample puts everything in one child.
// Absorbed nodes, empty slots and token leaves contribute nothing.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <array>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "compositions.hpp"
#include "model_tree.hpp"
#include "numeric.hpp"
#include "size_markov.hpp"

namespace semtree {

struct SampleOptions {
  int max_level = 0;  // 0: sample the complete tree; otherwise stop expanding at this level
};

/// Samples one tree by recursively splitting every eligible node with a
/// uniform weak composition. A child equal to its parent is absorbed; sizes 0
/// and 1 terminate.
template <class Rng>
ModelTree sample_tree(std::uint64_t n, int k, Rng& rng, SampleOptions opts = {},
                      std::optional<std::uint64_t> seed = {}) {
  if (n < 1) throw std::invalid_argument("sample_tree: N must be >= 1");
  if (k < 2) throw std::invalid_argument("sample_tree: k must be >= 2");
  struct Pending {
    std::uint64_t size;
    std::uint64_t parent;  // 0 for the root
    int level;
  };
  std::vector<ModelTree::Node> nodes;
  std::vector<Pending> stack{{n, 0, 1}};
  while (!stack.empty()) {
    const Pending p = stack.back();
    stack.pop_back();
    ModelTree::Node node;
    node.size = p.size;
    if (p.size == 0) {
      node.status = NodeStatus::absorbed;
    } else if (p.size == 1) {
      node.status = NodeStatus::token_leaf;
    } else if (p.size == p.parent) {
      node.status = NodeStatus::absorbed;
    } else if (opts.max_level > 0 && p.level >= opts.max_level) {
      node.status = NodeStatus::truncated;
    } else {
      node.status = NodeStatus::split;
      node.child_count = static_cast<std::uint32_t>(k);
      const auto comp = sample_weak_composition(p.size, k, rng);
      for (auto it = comp.parts.rbegin(); it != comp.parts.rend(); ++it)
        stack.push_back({*it, p.size, p.level + 1});
    }
    nodes.push_back(node);
  }
  ModelTree::fill_extents(nodes);
  return ModelTree(n, k, std::move(nodes), seed);
}

/// Convenience overload seeding a fresh mt19937_64.
inline ModelTree sample_tree_seeded(std::uint64_t n, int k, std::uint64_t seed, SampleOptions opts = {}) {
  std::mt19937_64 rng(seed);
  return sample_tree(n, k, rng, opts, seed);
}

/// log P(T): sum over split nodes of -ln Z_K(size).
inline LogProbability tree_log_prob(const ModelTree& tree, int k) {
  tree.validate();
  if (tree.is_truncated()) throw MalformedTree("tree_log_prob: depth-limited tree has no likelihood");
  for (const auto& n : tree.nodes())
    if (n.status == NodeStatus::split && static_cast<int>(n.child_count) > k)
      throw MalformedTree("tree_log_prob: node has more than K children");
  CompensatedSum s;
  for (const auto& n : tree.nodes())
    if (n.status == NodeStatus::split) s.add(-log_count_weak_compositions(static_cast<double>(n.size), k));
  return LogProbability{s.value()};
}

// ---------------------------------------------------------------------------
// Exhaustive enumeration

namespace detail {

inline void check_enumeration_args(std::uint64_t n, int k) {
  if (n < 1) throw std::invalid_argument("enumeration: N must be >= 1");
  if (k < 2) throw std::invalid_argument("enumeration: k must be >= 2");
}

/// Trees hanging below a survived node of size n (n >= 2), memoized by size.
inline BigInt count_survived_subtrees(std::uint64_t n, int k, std::map<std::uint64_t, BigInt>& memo) {
  if (auto it = memo.find(n); it != memo.end()) return it->second;
  BigInt total = 0;
  for (const auto& c : enumerate_weak_compositions(n, k)) {
    BigInt prod = 1;
    for (auto x : c.parts)
      if (x >= 2 && x < n) prod *= count_survived_subtrees(x, k, memo);
    total += prod;
  }
  memo.emplace(n, total);
  return total;
}

struct Fragment {
  std::vector<ModelTree::Node> nodes;  // pre-order, extents filled
  double log_prob = 0.0;
};

inline const std::vector<Fragment>& survived_fragments(std::uint64_t n, int k, const LogZTable& logz,
                                                       std::map<std::uint64_t, std::vector<Fragment>>& memo) {
  if (auto it = memo.find(n); it != memo.end()) return it->second;
  std::vector<Fragment> out;
  for (const auto& c : enumerate_weak_compositions(n, k)) {
    // Options per child slot.
    std::vector<std::vector<Fragment>> opts;
    opts.reserve(c.parts.size());
    for (auto x : c.parts) {
      if (x >= 2 && x < n) {
        opts.push_back(survived_fragments(x, k, logz, memo));
      } else {
        ModelTree::Node leaf;
        leaf.size = x;
        leaf.status = (x == 1) ? NodeStatus::token_leaf : NodeStatus::absorbed;
        opts.push_back({Fragment{{leaf}, 0.0}});
      }
    }
    std::vector<std::size_t> idx(opts.size(), 0);
    while (true) {
      Fragment f;
      ModelTree::Node root;
      root.size = n;
      root.status = NodeStatus::split;
      root.child_count = static_cast<std::uint32_t>(k);
      f.nodes.push_back(root);
      f.log_prob = -logz(n);
      for (std::size_t s = 0; s < opts.size(); ++s) {
        const Fragment& sub = opts[s][idx[s]];
        f.nodes.insert(f.nodes.end(), sub.nodes.begin(), sub.nodes.end());
        f.log_prob += sub.log_prob;
      }
      f.nodes[0].extent = static_cast<std::uint32_t>(f.nodes.size());
      out.push_back(std::move(f));
      std::size_t s = opts.size();
      while (s-- > 0) {
        if (++idx[s] < opts[s].size()) break;
        idx[s] = 0;
      }
      if (s == static_cast<std::size_t>(-1)) break;
    }
  }
  return memo.emplace(n, std::move(out)).first->second;
}

}  // namespace detail

/// Number of distinct trees with root size N.
inline BigInt count_trees(std::uint64_t n, int k) {
  detail::check_enumeration_args(n, k);
  if (n == 1) return 1;
  std::map<std::uint64_t, BigInt> memo;
  return detail::count_survived_subtrees(n, k, memo);
}

struct EnumeratedTree {
  ModelTree tree;
  LogProbability log_prob;
};

/// Every tree with root size N together with its log-probability.
inline std::vector<EnumeratedTree> enumerate_trees(std::uint64_t n, int k, std::uint64_t cap = kDefaultEnumerationCap) {
  detail::check_enumeration_args(n, k);
  const BigInt count = count_trees(n, k);
  if (count > cap)
    throw EnumerationTooLarge("enumeration too large: " + count.str() + " trees for N=" + std::to_string(n) +
                              ", K=" + std::to_string(k) + " exceed cap " + std::to_string(cap));
  std::vector<EnumeratedTree> out;
  if (n == 1) {
    out.push_back({ModelTree(1, k, {ModelTree::Node{1, NodeStatus::token_leaf, 0, 1}}), {0.0}});
    return out;
  }
  const LogZTable logz(n, k);
  std::map<std::uint64_t, std::vector<detail::Fragment>> memo;
  const auto& frags = detail::survived_fragments(n, k, logz, memo);
  out.reserve(frags.size());
  for (const auto& f : frags) out.push_back({ModelTree(n, k, f.nodes), {f.log_prob}});
  return out;
}

/// Trees sharing the same multiset of split-node sizes share one probability.
struct ProbabilityClass {
  std::vector<std::uint16_t> split_counts;  // index = node size
  BigInt multiplicity;
  double log_prob = 0.0;
};

/// Exhaustive enumeration of the tree distribution grouped into probability
/// classes; feasible far beyond the materialization cap.
inline std::vector<ProbabilityClass> tree_probability_classes(std::uint64_t n, int k,
                                                              std::uint64_t class_cap = kDefaultEnumerationCap) {
  detail::check_enumeration_args(n, k);
  using Key = std::vector<std::uint16_t>;
  using ClassMap = std::map<Key, BigInt>;
  const std::size_t width = static_cast<std::size_t>(n) + 1;
  std::map<std::uint64_t, ClassMap> memo;

  auto classes = [&](auto&& self, std::uint64_t size) -> const ClassMap& {
    if (auto it = memo.find(size); it != memo.end()) return it->second;
    ClassMap result;
    for (const auto& c : enumerate_weak_compositions(size, k)) {
      ClassMap acc{{Key(width, 0), BigInt(1)}};
      for (auto x : c.parts) {
        if (x < 2 || x >= size) continue;
        const ClassMap& sub = self(self, x);
        ClassMap next;
        for (const auto& [ka, ma] : acc)
          for (const auto& [kb, mb] : sub) {
            Key key = ka;
            for (std::size_t i = 0; i < width; ++i) key[i] = static_cast<std::uint16_t>(key[i] + kb[i]);
            next[key] += ma * mb;
          }
        acc = std::move(next);
        if (acc.size() > class_cap) throw EnumerationTooLarge("too many probability classes");
      }
      for (auto& [key, mult] : acc) {
        Key full = key;
        ++full[size];
        result[full] += mult;
      }
    }
    return memo.emplace(size, std::move(result)).first->second;
  };

  std::vector<ProbabilityClass> out;
  if (n == 1) {
    out.push_back({std::vector<std::uint16_t>(width, 0), BigInt(1), 0.0});
    return out;
  }
  const LogZTable logz(n, k);
  for (const auto& [key, mult] : classes(classes, n)) {
    CompensatedSum lp;
    for (std::size_t i = 2; i < width; ++i)
      if (key[i]) lp.add(-static_cast<double>(key[i]) * logz(i));
    out.push_back({key, mult, lp.value()});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ensemble entropy

enum class EntropyMethod { enumeration, levelsum, recursion };

inline std::string_view to_string(EntropyMethod m) {
  switch (m) {
    case EntropyMethod::enumeration: return "enumeration";
    case EntropyMethod::levelsum: return "levelsum";
    case EntropyMethod::recursion: return "recursion";
  }
  return "?";
}

struct EnsembleEntropy {
  std::uint64_t n = 0;
  int k = 0;
  EntropyMethod method = EntropyMethod::recursion;
  double h = 0.0;  // nats
};

/// -sum_T P(T) ln P(T) by exhaustive enumeration (grouped by probability class).
inline EnsembleEntropy entropy_exact(std::uint64_t n, int k) {
  CompensatedSum h;
  for (const auto& c : tree_probability_classes(n, k)) {
    const double m = c.multiplicity.convert_to<double>();
    h.add(-m * std::exp(c.log_prob) * c.log_prob);
  }
  return {n, k, EntropyMethod::enumeration, h.value()};
}

/// sum_L sum_n rho_L(n) ln Z_K(n) with rho from the size chain.
inline EnsembleEntropy entropy_levelsum(std::uint64_t n, int k) {
  if (n < 1) throw std::invalid_argument("entropy_levelsum: N must be >= 1");
  if (n == 1) return {n, k, EntropyMethod::levelsum, 0.0};
  LevelPropagator prop(n, k);  // survived() holds rho_L (expected counts)
  const auto& logz = prop.log_z();
  CompensatedSum h;
  while (true) {
    const auto& rho = prop.survived();
    CompensatedSum level, tail_bound;
    for (std::uint64_t s = 2; s <= n; ++s) {
      if (rho[s] == 0.0) continue;
      level.add(rho[s] * logz(s));
      // H(s) <= (number of split nodes <= 2s) * ln Z_K(s)
      tail_bound.add(rho[s] * 2.0 * static_cast<double>(s) * logz(s));
    }
    h.add(level.value());
    if (prop.extinct() || tail_bound.value() < 1e-16 * h.value()) break;
    prop.step(static_cast<double>(k));
  }
  return {n, k, EntropyMethod::levelsum, h.value()};
}

/// Memo table for H(n) keyed by K. Concurrent readers share the lock;
/// extensions are serialized.
class EntropyRecursion {
 public:
  double operator()(std::uint64_t n, int k) {
    {
      std::shared_lock lock(mutex_);
      if (auto it = tables_.find(k); it != tables_.end() && n < it->second.size()) return it->second[n];
    }
    std::unique_lock lock(mutex_);
    auto& table = tables_[k];
    if (n >= table.size()) extend(table, n, k);
    return table[n];
  }

  /// Copy of H(0..n) for one K.
  std::vector<double> table(std::uint64_t n, int k) {
    (*this)(n, k);
    std::shared_lock lock(mutex_);
    const auto& t = tables_.at(k);
    return std::vector<double>(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(n + 1));
  }

  static EntropyRecursion& shared() {
    static EntropyRecursion instance;
    return instance;
  }

 private:
  static void extend(std::vector<double>& table, std::uint64_t n, int k) {
    if (k < 2) throw std::invalid_argument("entropy_recursive: k must be >= 2");
    detail::check_log_range(n, k);
    const std::uint64_t start = table.size();
    table.resize(n + 1, 0.0);
    const LogZTable lz(n, k);
    const LogZTable lz1(n, k - 1);
    // Z_{K-1}(d) scaled by its largest value keeps every factor in range.
    const double base = lz1(n);
    std::vector<double> z1(n + 1);
    for (std::uint64_t d = 0; d <= n; ++d) z1[d] = std::exp(lz1(d) - base);
    for (std::uint64_t m = std::max<std::uint64_t>(start, 2); m <= n; ++m) {
      CompensatedSum s;
      for (std::uint64_t j = 2; j < m; ++j) s.add(z1[m - j] * table[j]);
      table[m] = lz(m) + static_cast<double>(k) * std::exp(base - lz(m)) * s.value();
    }
  }

  std::shared_mutex mutex_;
  std::map<int, std::vector<double>> tables_;
};

/// H(N) = ln Z_K(N) + K sum_{n=2}^{N-1} [Z_{K-1}(N-n)/Z_K(N)] H(n), memoized.
inline EnsembleEntropy entropy_recursive(std::uint64_t n, int k) {
  if (n < 1) throw std::invalid_argument("entropy_recursive: N must be >= 1");
  return {n, k, EntropyMethod::recursion, EntropyRecursion::shared()(n, k)};
}

// ---------------------------------------------------------------------------
// Asymptotic equipartition

struct AepStats {
  std::uint64_t n = 0;
  int k = 0;
  std::size_t samples = 0;
  std::vector<double> values;  // -(1/N) log P(T) per sample
  double mean = 0.0;
  double stddev = 0.0;
};

/// Seed of the i-th sample stream derived from a base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

/// Samples M trees (sample i uses derive_seed(seed, i)) and summarizes
/// -(1/N) log P(T). Results do not depend on `jobs`.
inline AepStats aep_sample_stats(std::uint64_t n, int k, std::size_t m, std::uint64_t seed, unsigned jobs = 1) {
  if (m < 1) throw std::invalid_argument("aep_sample_stats: M must be >= 1");
  AepStats st{n, k, m, std::vector<double>(m, 0.0), 0.0, 0.0};
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < m; i += stride) {
      const auto tree = sample_tree_seeded(n, k, derive_seed(seed, i));
      st.values[i] = 0.0 - tree_log_prob(tree, k).value / static_cast<double>(n);
    }
  };
  jobs = std::max(1u, jobs);
  if (jobs == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(work, j, jobs);
  }
  st.mean = compensated_total(st.values) / static_cast<double>(m);
  if (m > 1) {
    CompensatedSum ss;
    for (double v : st.values) ss.add((v - st.mean) * (v - st.mean));
    st.stddev = std::sqrt(ss.value() / static_cast<double>(m - 1));
  }
  return st;
}

}  // namespace semtree
