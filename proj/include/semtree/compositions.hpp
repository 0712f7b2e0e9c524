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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace semtree {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

/// Number of child slots per split. Always >= 1; the tree ensemble needs >= 2.
class BranchingFactor {
 public:
  explicit BranchingFactor(int k) : k_(k) {
    if (k < 1) throw std::invalid_argument("branching factor must be >= 1, got " + std::to_string(k));
  }
  int value() const noexcept { return k_; }
  operator int() const noexcept { return k_; }

 private:
  int k_;
};

/// Log-probability in nats (<= 0).
struct LogProbability {
  double value = 0.0;
};

/// Ordered tuple of non-negative parts summing to total; zeros allowed.
struct WeakComposition {
  std::vector<std::uint64_t> parts;
  std::uint64_t total = 0;

  friend bool operator==(const WeakComposition&, const WeakComposition&) = default;
};

class EnumerationTooLarge : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Z_K(n) = C(n+K-1, K-1), exact. Z_0(n) is 1 for n == 0 and 0 otherwise.
inline BigInt count_weak_compositions(std::uint64_t n, int k) {
  if (k < 0) throw std::invalid_argument("k must be non-negative");
  if (k == 0) return n == 0 ? BigInt(1) : BigInt(0);
  // C(n+k-1, k-1) built incrementally; every partial product is itself a binomial.
  BigInt result = 1;
  for (int j = 1; j < k; ++j) {
    result *= BigInt(n + static_cast<std::uint64_t>(j));
    result /= j;
  }
  return result;
}

/// ln Z_K(n) = sum_{j=1}^{K-1} log1p(n / j); accurate to a few ulps for any n.
inline double log_count_weak_compositions(double n, int k) {
  if (k == 0) return n == 0 ? 0.0 : -INFINITY;
  double acc = 0.0;
  for (int j = 1; j < k; ++j) acc += std::log1p(n / j);
  return acc;
}

/// Table of ln Z_K(n) for n = 0..n_max.
class LogZTable {
 public:
  LogZTable(std::uint64_t n_max, int k) : k_(k), values_(n_max + 1) {
    for (std::uint64_t n = 0; n <= n_max; ++n)
      values_[n] = log_count_weak_compositions(static_cast<double>(n), k);
  }
  int k() const noexcept { return k_; }
  std::uint64_t n_max() const noexcept { return values_.size() - 1; }
  double operator()(std::uint64_t n) const {
    return n < values_.size() ? values_[n] : log_count_weak_compositions(static_cast<double>(n), k_);
  }

 private:
  int k_;
  std::vector<double> values_;
};

/// Marginal probability that a fixed child of a size-n parent has size m:
/// Z_{K-1}(n-m) / Z_K(n).
inline double split_probability(std::uint64_t m, std::uint64_t n, int k) {
  if (m > n) throw std::invalid_argument("split_probability: child size exceeds parent size");
  if (k < 1) throw std::invalid_argument("split_probability: k must be >= 1");
  if (k == 1) return m == n ? 1.0 : 0.0;
  return std::exp(log_count_weak_compositions(static_cast<double>(n - m), k - 1) -
                  log_count_weak_compositions(static_cast<double>(n), k));
}

/// Exact rational form of split_probability.
inline Rational split_probability_exact(std::uint64_t m, std::uint64_t n, int k) {
  if (m > n) throw std::invalid_argument("split_probability: child size exceeds parent size");
  return Rational(count_weak_compositions(n - m, k - 1), count_weak_compositions(n, k));
}

inline constexpr std::uint64_t kDefaultEnumerationCap = 10'000'000;

/// All weak compositions of n into k parts, lexicographically ascending.
inline std::vector<WeakComposition> enumerate_weak_compositions(std::uint64_t n, int k,
                                                                std::uint64_t cap = kDefaultEnumerationCap) {
  if (k < 1) throw std::invalid_argument("enumerate_weak_compositions: k must be >= 1");
  const BigInt count = count_weak_compositions(n, k);
  if (count > cap)
    throw EnumerationTooLarge("enumeration too large: Z_" + std::to_string(k) + "(" + std::to_string(n) +
                              ") = " + count.str() + " exceeds cap " + std::to_string(cap));
  std::vector<WeakComposition> out;
  out.reserve(count.convert_to<std::size_t>());

  std::vector<std::uint64_t> parts(static_cast<std::size_t>(k), 0);
  parts.back() = n;
  // Odometer: the prefix parts[0..k-2] runs through all vectors with sum <= n in
  // lexicographic order; the last part absorbs the remainder.
  while (true) {
    out.push_back(WeakComposition{parts, n});
    if (k == 1) break;
    int i = k - 2;
    std::uint64_t prefix = n - parts.back();
    // Increment parts[i] if budget allows, otherwise carry leftwards.
    while (i >= 0 && prefix == n) {
      prefix -= parts[static_cast<std::size_t>(i)];
      parts[static_cast<std::size_t>(i)] = 0;
      --i;
    }
    if (i < 0) break;
    ++parts[static_cast<std::size_t>(i)];
    ++prefix;
    parts.back() = n - prefix;
  }
  return out;
}

/// Uniform weak composition: a uniform (k-1)-subset of the n+k-1 stars-and-bars
/// slots marks the bars (Floyd's sampling); parts are the star runs between bars.
template <class Rng>
WeakComposition sample_weak_composition(std::uint64_t n, int k, Rng& rng) {
  if (k < 1) throw std::invalid_argument("sample_weak_composition: k must be >= 1");
  const std::uint64_t bars = static_cast<std::uint64_t>(k - 1);
  const std::uint64_t slots = n + bars;
  std::vector<std::uint64_t> chosen;
  chosen.reserve(bars);
  for (std::uint64_t j = slots - bars; j < slots; ++j) {
    std::uniform_int_distribution<std::uint64_t> pick(0, j);
    const std::uint64_t t = pick(rng);
    const auto pos = std::lower_bound(chosen.begin(), chosen.end(), t);
    if (pos != chosen.end() && *pos == t)
      chosen.insert(std::lower_bound(chosen.begin(), chosen.end(), j), j);
    else
      chosen.insert(pos, t);
  }
  WeakComposition out;
  out.total = n;
  out.parts.reserve(static_cast<std::size_t>(k));
  std::uint64_t prev = 0;  // one past the previous bar
  for (std::uint64_t bar : chosen) {
    out.parts.push_back(bar - prev);
    prev = bar + 1;
  }
  out.parts.push_back(slots - prev);
  return out;
}

}  // namespace semtree
