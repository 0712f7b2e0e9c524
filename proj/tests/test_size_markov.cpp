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

#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include <semtree/size_markov.hpp>
#include <semtree/tree_ensemble.hpp>

namespace semtree {
namespace {

TEST(TransitionMatrix, ColumnsAreStochastic) {
  for (int k : {2, 3, 4}) {
    const auto t = build_transition(10, k);
    for (std::size_t c = 0; c < t.dim(); ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < t.dim(); ++r) {
        EXPECT_GE(t(r, c), 0.0);
        s += t(r, c);
      }
      // survived-0 and survived-1 are unreachable but still map to absorbing states.
      EXPECT_NEAR(s, 1.0, 1e-14) << "k=" << k << " col " << c;
    }
  }
}

TEST(TransitionMatrix, AbsorbedColumnsAreIdentity) {
  const auto t = build_transition(8, 3);
  for (std::uint64_t i = 0; i <= 8; ++i)
    for (std::size_t r = 0; r < t.dim(); ++r)
      EXPECT_EQ(t(r, t.absorbed_index(i)), r == t.absorbed_index(i) ? 1.0 : 0.0);
}

TEST(TransitionMatrix, HandComputedColumnN3K2) {
  const auto t = build_transition(3, 2);
  const auto col = t.survived_index(3);
  EXPECT_DOUBLE_EQ(t(t.absorbed_index(3), col), 0.25);
  EXPECT_DOUBLE_EQ(t(t.survived_index(2), col), 0.25);
  EXPECT_DOUBLE_EQ(t(t.absorbed_index(1), col), 0.25);
  EXPECT_DOUBLE_EQ(t(t.absorbed_index(0), col), 0.25);
}

TEST(TransitionMatrix, DenseCap) {
  EXPECT_THROW(build_transition(100, 2, 50), DenseTooLarge);
  EXPECT_THROW(build_transition(0, 2), std::invalid_argument);
}

TEST(LevelMarginal, RootLevelIsDelta) {
  const auto d = level_marginal(12, 3, 1);
  for (std::uint64_t n = 0; n <= 12; ++n) {
    EXPECT_EQ(d.survived[n], n == 12 ? 1.0 : 0.0);
    EXPECT_EQ(d.absorbed[n], 0.0);
  }
  const auto one = level_marginal(1, 3, 1);
  EXPECT_EQ(one.absorbed[1], 1.0);
}

TEST(LevelMarginal, SecondLevelFromRootSplits) {
  // Root splits (3,0),(0,3),(2,1),(1,2): the tracked child is 0,1,2,3 with probability 1/4 each.
  const auto d = level_marginal(3, 2, 2);
  EXPECT_DOUBLE_EQ(d.survived[2], 0.25);
  EXPECT_DOUBLE_EQ(d.absorbed[0], 0.25);
  EXPECT_DOUBLE_EQ(d.absorbed[1], 0.25);
  EXPECT_DOUBLE_EQ(d.absorbed[3], 0.25);
  EXPECT_DOUBLE_EQ(d.survived[3], 0.0);
}

TEST(LevelMarginal, MassConserved) {
  for (const auto& d : level_marginals(50, 4, 20)) EXPECT_NEAR(d.total_mass(), 1.0, 1e-12) << "L=" << d.level;
}

TEST(LevelMarginal, DenseAndMatrixFreeAgree) {
  for (std::uint64_t n : {2ull, 7ull, 40ull, 150ull})
    for (int k : {2, 3, 5}) {
      const auto t = build_transition(n, k);
      for (int level : {1, 2, 3, 6, 12}) {
        const auto a = level_marginal(n, k, level);
        const auto b = level_marginal_dense(t, level);
        for (std::uint64_t j = 0; j <= n; ++j) {
          EXPECT_NEAR(a.survived[j], b.survived[j], 1e-13) << n << "," << k << "," << level << "," << j;
          EXPECT_NEAR(a.absorbed[j], b.absorbed[j], 1e-13);
        }
      }
    }
}

TEST(LevelMarginal, EventuallyAllAbsorbed) {
  LevelPropagator p(64, 3);
  int guard = 0;
  while (!p.extinct() && guard++ < 10000) p.step();
  EXPECT_TRUE(p.extinct());
  EXPECT_NEAR(p.snapshot().absorbed_mass(), 1.0, 1e-12);
}

TEST(DensityOfStates, Anchors) {
  const auto l1 = density_of_states(3, 2, 1);
  EXPECT_EQ(l1[3], 1.0);
  const auto l2 = density_of_states(3, 2, 2);
  EXPECT_DOUBLE_EQ(l2[2], 0.5);
  EXPECT_EQ(l2[3], 0.0);
}

TEST(DensityOfStates, ReproducesEnumerationEntropy) {
  for (std::uint64_t n = 2; n <= 8; ++n)
    for (int k = 2; k <= 4; ++k) {
      const LogZTable logz(n, k);
      double h = 0.0;
      for (int level = 1; level <= 200; ++level) {
        const auto rho = density_of_states(n, k, level);
        double layer = 0.0;
        for (std::uint64_t j = 2; j <= n; ++j) layer += rho[j] * logz(j);
        h += layer;
        if (layer < 1e-18) break;
      }
      EXPECT_NEAR(h, entropy_exact(n, k).h, 1e-9) << n << "," << k;
    }
}

TEST(Occupation, SizeIsConserved) {
  for (int level = 0; level <= 15; ++level) {
    const auto m = expected_occupation(20, 3, level);
    EXPECT_NEAR(m.total_size(), 20.0, 1e-10) << "L=" << level;
  }
}

TEST(Occupation, RootAndMonotoneNodeCount) {
  const auto m0 = expected_occupation(20, 3, 0);
  EXPECT_EQ(m0.counts[21 + 20], 1.0);
  EXPECT_EQ(m0.total_nodes(), 1.0);
  for (int k : {2, 3, 4}) {
    double prev = 0.0;
    for (int level = 0; level <= 15; ++level) {
      const double c = expected_occupation(20, k, level).total_nodes();
      EXPECT_GE(c, prev - 1e-12);
      prev = c;
    }
  }
}

TEST(Occupation, CsvHasHeaderAndRows) {
  std::ostringstream os;
  const auto ls = level_marginals(4, 2, 3);
  write_level_csv(os, ls);
  const auto text = os.str();
  EXPECT_EQ(text.rfind("level,size,survived_p,absorbed_p\n", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 3 * 5);
}

TEST(LevelPropagator, RejectsBadArguments) {
  EXPECT_THROW(LevelPropagator(0, 2), std::invalid_argument);
  EXPECT_THROW(LevelPropagator(5, 1), std::invalid_argument);
  EXPECT_THROW(level_marginal(5, 2, 0), std::invalid_argument);
}

}  // namespace
}  // namespace semtree
