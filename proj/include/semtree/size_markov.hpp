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

// Chunk-size Markov chain with absorbing states.
//
// State layout follows the doubled chain: indices 0..N are absorbed sizes,
// N+1..2N+1 are survived sizes. Survived 0 and 1 are identified with the
// absorbed states and always carry zero mass here.
//
// Levels: the root is level 1 (point mass on survived N). The occupation
// chain is indexed from 0 instead (m_0 is the root), matching Q = T B.

#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "compositions.hpp"
#include "numeric.hpp"

namespace semtree {

struct LevelDistribution {
  std::uint64_t root_size = 0;
  int level = 1;
  std::vector<double> absorbed;  // sizes 0..N
  std::vector<double> survived;  // sizes 0..N; entries 0 and 1 stay zero

  double absorbed_mass() const { return compensated_total(absorbed); }
  double survived_mass() const { return compensated_total(survived); }
  double total_mass() const {
    CompensatedSum s;
    for (double x : absorbed) s.add(x);
    for (double x : survived) s.add(x);
    return s.value();
  }
  /// Probability of size n in either state.
  double at(std::uint64_t n) const { return absorbed.at(n) + survived.at(n); }
};

/// Dense column-stochastic transition matrix of size 2(N+1) x 2(N+1).
class TransitionMatrix {
 public:
  TransitionMatrix(std::uint64_t n, int k) : n_(n), k_(k), dim_(2 * (n + 1)), data_(dim_ * dim_, 0.0) {}

  std::uint64_t root_size() const noexcept { return n_; }
  int k() const noexcept { return k_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t absorbed_index(std::uint64_t size) const noexcept { return static_cast<std::size_t>(size); }
  std::size_t survived_index(std::uint64_t size) const noexcept { return static_cast<std::size_t>(n_ + 1 + size); }

  double operator()(std::size_t row, std::size_t col) const { return data_[row * dim_ + col]; }
  double& operator()(std::size_t row, std::size_t col) { return data_[row * dim_ + col]; }

  std::vector<double> apply(std::span<const double> v) const {
    std::vector<double> out(dim_, 0.0);
    for (std::size_t r = 0; r < dim_; ++r) {
      CompensatedSum s;
      const double* row = &data_[r * dim_];
      for (std::size_t c = 0; c < dim_; ++c)
        if (v[c] != 0.0) s.add(row[c] * v[c]);
      out[r] = s.value();
    }
    return out;
  }

 private:
  std::uint64_t n_;
  int k_;
  std::size_t dim_;
  std::vector<double> data_;
};

inline constexpr std::uint64_t kDenseTransitionCap = 20'000;

class DenseTooLarge : public std::length_error {
 public:
  using std::length_error::length_error;
};

inline TransitionMatrix build_transition(std::uint64_t n, int k, std::uint64_t cap = kDenseTransitionCap) {
  if (n < 1) throw std::invalid_argument("build_transition: N must be >= 1");
  if (k < 2) throw std::invalid_argument("build_transition: k must be >= 2");
  if (n > cap)
    throw DenseTooLarge("build_transition: N = " + std::to_string(n) + " exceeds the dense cap " +
                        std::to_string(cap) + "; use the matrix-free level_marginal path");
  TransitionMatrix t(n, k);
  for (std::uint64_t i = 0; i <= n; ++i) t(t.absorbed_index(i), t.absorbed_index(i)) = 1.0;
  t(t.absorbed_index(0), t.survived_index(0)) = 1.0;
  if (n >= 1) t(t.absorbed_index(1), t.survived_index(1)) = 1.0;
  for (std::uint64_t i = 2; i <= n; ++i) {
    const std::size_t col = t.survived_index(i);
    for (std::uint64_t j = 0; j <= i; ++j) {
      const double p = split_probability(j, i, k);
      if (j == i || j <= 1)
        t(t.absorbed_index(j), col) += p;
      else
        t(t.survived_index(j), col) += p;
    }
  }
  return t;
}

namespace detail {

/// strict[j] = sum_{i>j} w[i] Z_{K-1}(i-j), computed with K-1 iterated suffix
/// sums (Z_{K-1} is the kernel of the (K-1)-fold cumulative sum). All terms
/// are non-negative so no cancellation occurs.
inline std::vector<double> strict_child_mass(std::span<const double> w, int k) {
  const std::size_t n = w.size();
  std::vector<double> t(n, 0.0);
  if (k < 2 || n == 0) return t;
  // T_1[j] = sum_{i>j} w[i]
  double run = 0.0;
  for (std::size_t j = n; j-- > 0;) {
    t[j] = run;
    run += w[j];
  }
  // T_r[j] = T_{r-1}[j] + sum_{j'>j} (T_{r-1}[j'] + w[j'])
  for (int r = 2; r <= k - 1; ++r) {
    double acc = 0.0;
    for (std::size_t j = n; j-- > 0;) {
      const double prev = t[j];
      t[j] = prev + acc;
      acc += prev + w[j];
    }
  }
  return t;
}

inline void check_log_range(std::uint64_t n, int k) {
  if (log_count_weak_compositions(static_cast<double>(n), k) > 700.0)
    throw std::domain_error("Z_K(N) overflows double precision for N = " + std::to_string(n) +
                            ", K = " + std::to_string(k));
}

}  // namespace detail

/// One level of the chain. `multiplicity` scales children of survived parents:
/// 1 propagates probabilities (T), K propagates expected counts (Q = T B).
class LevelPropagator {
 public:
  LevelPropagator(std::uint64_t n, int k) : n_(n), k_(k), logz_(n, k), absorbed_(n + 1, 0.0), survived_(n + 1, 0.0) {
    if (n < 1) throw std::invalid_argument("root size must be >= 1");
    if (k < 2) throw std::invalid_argument("branching factor must be >= 2");
    detail::check_log_range(n, k);
    inv_z_.resize(n + 1);
    for (std::uint64_t i = 0; i <= n; ++i) inv_z_[i] = std::exp(-logz_(i));
    if (n <= 1)
      absorbed_[n] = 1.0;
    else
      survived_[n] = 1.0;
  }

  void step(double multiplicity = 1.0) {
    std::vector<double> w(n_ + 1, 0.0);
    for (std::uint64_t i = 2; i <= n_; ++i) w[i] = multiplicity * survived_[i] * inv_z_[i];
    const auto strict = detail::strict_child_mass(w, k_);
    // Failure to split: the child equal to its parent is absorbed (kernel Z_{K-1}(0) = 1).
    for (std::uint64_t j = 2; j <= n_; ++j) absorbed_[j] += w[j];
    absorbed_[0] += strict[0];
    absorbed_[1] += strict[1];
    for (std::uint64_t j = 2; j <= n_; ++j) survived_[j] = strict[j];
    ++level_;
  }

  LevelDistribution snapshot() const { return LevelDistribution{n_, level_, absorbed_, survived_}; }
  const std::vector<double>& survived() const noexcept { return survived_; }
  const std::vector<double>& absorbed() const noexcept { return absorbed_; }
  const LogZTable& log_z() const noexcept { return logz_; }
  int level() const noexcept { return level_; }
  bool extinct() const {
    for (std::uint64_t j = 2; j <= n_; ++j)
      if (survived_[j] != 0.0) return false;
    return true;
  }

 private:
  std::uint64_t n_;
  int k_;
  LogZTable logz_;
  std::vector<double> inv_z_;
  std::vector<double> absorbed_;
  std::vector<double> survived_;
  int level_ = 1;
};

/// P_L(n | N) via the matrix-free recursion.
inline LevelDistribution level_marginal(std::uint64_t n, int k, int level) {
  if (level < 1) throw std::invalid_argument("level_marginal: L must be >= 1");
  LevelPropagator prop(n, k);
  while (prop.level() < level) prop.step();
  return prop.snapshot();
}

/// Levels 1..max_level in one pass.
inline std::vector<LevelDistribution> level_marginals(std::uint64_t n, int k, int max_level) {
  if (max_level < 1) throw std::invalid_argument("level_marginals: max_level must be >= 1");
  std::vector<LevelDistribution> out;
  out.reserve(static_cast<std::size_t>(max_level));
  LevelPropagator prop(n, k);
  out.push_back(prop.snapshot());
  while (prop.level() < max_level) {
    prop.step();
    out.push_back(prop.snapshot());
  }
  return out;
}

/// P_L(n | N) as T^{L-1} applied to the root vector.
inline LevelDistribution level_marginal_dense(const TransitionMatrix& t, int level) {
  if (level < 1) throw std::invalid_argument("level_marginal: L must be >= 1");
  const std::uint64_t n = t.root_size();
  std::vector<double> v(t.dim(), 0.0);
  v[n <= 1 ? t.absorbed_index(n) : t.survived_index(n)] = 1.0;
  for (int l = 1; l < level; ++l) v = t.apply(v);
  LevelDistribution d{n, level, std::vector<double>(n + 1), std::vector<double>(n + 1)};
  for (std::uint64_t i = 0; i <= n; ++i) {
    d.absorbed[i] = v[t.absorbed_index(i)];
    d.survived[i] = v[t.survived_index(i)];
  }
  return d;
}

/// Expected number of splitting nodes of size n at level L: K^{L-1} times the
/// survived marginal, restricted to n >= 2 (root level has multiplicity 1).
inline std::vector<double> density_of_states(std::uint64_t n, int k, int level) {
  if (level < 1) throw std::invalid_argument("density_of_states: L must be >= 1");
  LevelPropagator prop(n, k);
  while (prop.level() < level) prop.step(static_cast<double>(k));
  auto rho = prop.survived();
  if (rho.size() > 0) rho[0] = 0.0;
  if (rho.size() > 1) rho[1] = 0.0;
  return rho;
}

/// Expected node counts per (state, size); layout matches TransitionMatrix.
struct OccupationVector {
  std::uint64_t root_size = 0;
  int level = 0;
  std::vector<double> counts;  // length 2(N+1)

  double total_nodes() const { return compensated_total(counts); }
  /// chi . m: size-weighted sum, equals N.
  double total_size() const {
    CompensatedSum s;
    const std::size_t half = counts.size() / 2;
    for (std::size_t i = 0; i < counts.size(); ++i) s.add(static_cast<double>(i % half) * counts[i]);
    return s.value();
  }
};

/// m_L = (T B)^L m_0 with m_0 the root; level 0 is the root itself.
inline OccupationVector expected_occupation(std::uint64_t n, int k, int level) {
  if (level < 0) throw std::invalid_argument("expected_occupation: L must be >= 0");
  LevelPropagator prop(n, k);
  for (int l = 0; l < level; ++l) prop.step(static_cast<double>(k));
  OccupationVector m{n, level, std::vector<double>(2 * (n + 1), 0.0)};
  for (std::uint64_t i = 0; i <= n; ++i) {
    m.counts[i] = prop.absorbed()[i];
    m.counts[n + 1 + i] = prop.survived()[i];
  }
  return m;
}

/// CSV dump: level,size,survived_p,absorbed_p
inline void write_level_csv(std::ostream& os, std::span<const LevelDistribution> levels) {
  os << "level,size,survived_p,absorbed_p\n";
  const auto old = os.precision(17);
  for (const auto& d : levels)
    for (std::size_t n = 0; n < d.survived.size(); ++n)
      os << d.level << ',' << n << ',' << d.survived[n] << ',' << d.absorbed[n] << '\n';
  os.precision(old);
}

}  // namespace semtree
