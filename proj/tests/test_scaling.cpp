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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include <semtree/numeric.hpp>
#include <semtree/scaling.hpp>
#include <semtree/size_markov.hpp>

namespace semtree {
namespace {

// Log-uniform probe points in [lo, hi].
std::vector<double> probes(double lo, double hi, int count) {
  std::vector<double> s;
  for (int i = 0; i < count; ++i) s.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
  return s;
}

TEST(ClosedForms, LognormalParameters) {
  const auto p2 = lognormal_params(2, 5);
  EXPECT_DOUBLE_EQ(p2.mu, -4.0);
  EXPECT_DOUBLE_EQ(p2.sigma, 2.0);
  const auto p4 = lognormal_params(4, 3);
  EXPECT_NEAR(p4.mu, -2.0 * (1.0 + 0.5 + 1.0 / 3.0), 1e-14);
  EXPECT_NEAR(p4.sigma * p4.sigma, 2.0 * (1.0 + 0.25 + 1.0 / 9.0), 1e-14);
  EXPECT_THROW(lognormal_params(1, 3), std::invalid_argument);
  EXPECT_THROW(lognormal_params(3, 1), std::invalid_argument);
}

TEST(ClosedForms, ExactK2Anchors) {
  for (double s : {1e-9, 0.3, 1.0}) EXPECT_DOUBLE_EQ(exact_f_k2(2, s), 1.0);
  EXPECT_NEAR(exact_f_k2(3, std::exp(-1.0)), 1.0, 1e-14);
  EXPECT_NEAR(exact_f_k2(4, std::exp(-2.0)), 2.0, 1e-13);
  EXPECT_THROW(exact_f_k2(3, 0.0), std::domain_error);
  EXPECT_THROW(exact_f_k2(3, 1.5), std::domain_error);
}

TEST(ClosedForms, ExactK2IsNormalized) {
  // Substituting s = e^-v turns the integral into a Gamma(L-1) density in v.
  for (int level = 2; level <= 12; ++level) {
    const double v_max = 60.0 + 4.0 * level;
    const double integral =
        simpson([&](double v) { return exact_f_k2(level, std::exp(-v)) * std::exp(-v); }, 1e-12, v_max, 20000);
    EXPECT_NEAR(integral, 1.0, 1e-8) << "L=" << level;
  }
}

TEST(ClosedForms, AsymptoteEqualsExactAtK2) {
  for (int level = 2; level <= 8; ++level)
    for (double s : {1e-8, 1e-3, 0.5}) EXPECT_NEAR(small_s_asymptote(2, level, s), exact_f_k2(level, s), 1e-12 * exact_f_k2(level, s));
}

TEST(ClosedForms, MellinMomentAnchors) {
  for (int k : {2, 3, 5})
    for (int level = 1; level <= 6; ++level) {
      EXPECT_NEAR(mellin_moment(k, level, 0.0), 1.0, 1e-13);
      EXPECT_NEAR(mellin_moment(k, level, 1.0), std::pow(static_cast<double>(k), -(level - 1)), 1e-13);
    }
  EXPECT_THROW(mellin_moment(3, 2, -1.0), std::domain_error);
}

TEST(ScalingFunction, LevelOneIsPointMass) {
  const auto c = scaling_function(3, 1);
  EXPECT_TRUE(c.is_point_mass());
  EXPECT_DOUBLE_EQ(c.cdf(0.99), 0.0);
  EXPECT_DOUBLE_EQ(c.cdf(1.0), 1.0);
  EXPECT_THROW(c(0.5), std::logic_error);
}

TEST(ScalingFunction, LevelTwoIsBetaDensity) {
  for (int k : {2, 3, 4, 7}) {
    const auto c = scaling_function(k, 2);
    for (std::size_t i = 0; i < c.grid().size(); ++i) {
      const double beta = (k - 1) * std::pow(1.0 - c.grid()[i], k - 2);
      EXPECT_NEAR(c.density()[i], beta, 1e-12 * std::max(1.0, beta));
    }
    for (double s : probes(1e-6, 0.95, 40)) {
      const double beta = (k - 1) * std::pow(1.0 - s, k - 2);
      EXPECT_NEAR(c(s), beta, 1e-7 * std::max(1.0, beta)) << "k=" << k << " s=" << s;
    }
  }
}

TEST(ScalingFunction, MatchesExactK2) {
  for (int level = 3; level <= 12; ++level) {
    const auto c = scaling_function(2, level);
    double worst = 0.0;
    for (std::size_t i = 0; i < c.grid().size(); i += 7) {
      const double s = c.grid()[i];
      const double exact = exact_f_k2(level, s);
      worst = std::max(worst, std::abs(c.density()[i] - exact) / std::max(1.0, exact));
    }
    EXPECT_LE(worst, 1e-4) << "L=" << level;
  }
}

TEST(ScalingFunction, NormalizationAndFirstMoment) {
  for (int k : {2, 3, 4})
    for (int level = 2; level <= 8; ++level) {
      const auto c = scaling_function(k, level);
      EXPECT_NEAR(c.normalization(), 1.0, 1e-6) << "k=" << k << " L=" << level;
      EXPECT_NEAR(c.moment(1.0), std::pow(static_cast<double>(k), -(level - 1)), 1e-6) << "k=" << k << " L=" << level;
      EXPECT_NEAR(c.cdf(1.0), 1.0, 1e-6);
    }
}

TEST(ScalingFunction, MellinMomentIdentity) {
  for (int k : {2, 3, 4})
    for (int level = 2; level <= 8; ++level) {
      const auto c = scaling_function(k, level);
      for (double t : {0.5, 1.0, 2.0})
        EXPECT_NEAR(c.moment(t), mellin_moment(k, level, t), 1e-4) << "k=" << k << " L=" << level << " t=" << t;
    }
}

TEST(ScalingFunction, ApproachesSmallSAsymptote) {
  // The ratio to the leading small-s form creeps towards 1 as s -> 0, with
  // corrections of relative order 1 / ln(1/s).
  const auto c = scaling_function(3, 4);
  double prev = 0.0;
  for (double s : {1e-2, 1e-4, 1e-6, 1e-8, 1e-10}) {
    const double ratio = c(s) / small_s_asymptote(3, 4, s);
    EXPECT_GT(ratio, prev) << "s=" << s;
    EXPECT_LT(ratio, 1.0);
    prev = ratio;
  }
}

TEST(ScalingFunction, RefinementDoublingIsSmall) {
  for (int k : {2, 4})
    for (int level : {3, 6}) {
      const auto r = refinement_error(k, level);
      EXPECT_LE(r.max_rel, 1e-4) << "k=" << k << " L=" << level;
    }
}

TEST(ScalingFunction, ThreadedMatchesSerial) {
  const auto a = scaling_function(4, 6, {}, 1);
  const auto b = scaling_function(4, 6, {}, 3);
  ASSERT_EQ(a.density().size(), b.density().size());
  for (std::size_t i = 0; i < a.density().size(); ++i) EXPECT_DOUBLE_EQ(a.density()[i], b.density()[i]);
}

TEST(ScalingFunction, MarkovChainConverges) {
  // N P_L(N s) from the finite chain against the continuum curve.
  const std::uint64_t n = 10000;
  const int k = 4;
  const auto marginals = level_marginals(n, k, 6);
  for (int level = 2; level <= 6; ++level) {
    const auto c = scaling_function(k, level);
    const auto& surv = marginals[static_cast<std::size_t>(level - 1)].survived;
    double peak = 0.0, worst = 0.0;
    for (std::uint64_t m = 10; m <= 9000; ++m) {
      const double s = static_cast<double>(m) / n;
      const double f = c(s);
      peak = std::max(peak, f);
      worst = std::max(worst, std::abs(static_cast<double>(n) * surv[m] - f));
    }
    EXPECT_LE(worst / peak, 0.02) << "L=" << level;
  }
}

TEST(Collapse, KsDecreasesWithLevel) {
  for (int k : {2, 4, 6}) {
    double prev = 1.0;
    for (int level : {4, 8, 16}) {
      const auto c = scaling_function(k, level);
      const double d = ks_distance_to_normal(c, lognormal_params(k, level));
      EXPECT_LT(d, prev) << "k=" << k << " L=" << level;
      prev = d;
    }
  }
}

TEST(Collapse, CurvesAgreeAtDeepLevel) {
  const int level = 20;
  const auto c2 = scaling_function(2, level);
  const auto c4 = scaling_function(4, level);
  const auto p2 = lognormal_params(2, level), p4 = lognormal_params(4, level);
  const double d2 = ks_distance_to_normal(c2, p2), d4 = ks_distance_to_normal(c4, p4);
  double between = 0.0;
  for (double x = -4.0; x <= 4.0; x += 0.01)
    between = std::max(between, std::abs(standardized_cdf(c2, p2, x) - standardized_cdf(c4, p4, x)));
  EXPECT_LE(between, 2.0 * std::max(d2, d4));
  EXPECT_LT(std::max(d2, d4), 0.05);
}

TEST(Collapse, StandardizedSamples) {
  const auto p = lognormal_params(3, 5);
  const std::vector<double> s{std::exp(p.mu), std::exp(p.mu + p.sigma)};
  const auto x = standardize(s, p);
  EXPECT_NEAR(x[0], 0.0, 1e-12);
  EXPECT_NEAR(x[1], 1.0, 1e-12);
}

TEST(Collapse, CurveCsv) {
  std::ostringstream os;
  write_curve_csv(os, scaling_function(2, 3));
  const auto text = os.str();
  EXPECT_EQ(text.rfind("s,f_L,x,phi\n", 0), 0u);
  EXPECT_GT(std::count(text.begin(), text.end(), '\n'), 4000);
}

TEST(EntropyRate, RecursionSlopeNearKnownValues) {
  const auto r4 = entropy_rate(4);
  EXPECT_NEAR(r4.h, 2.5, 0.1);
  EXPECT_TRUE(r4.converged);
  const auto r2 = entropy_rate(2);
  const auto series = exact_k2_rate();
  EXPECT_NEAR(r2.h, series.h, 0.02 * series.h);
}

TEST(EntropyRate, ExactK2Series) {
  // Independent partial sum with an integral tail estimate.
  double direct = 0.0;
  const int m_max = 2'000'000;
  for (int m = 2; m <= m_max; ++m) direct += 2.0 * std::log1p(m) / ((m + 2.0) * (m + 3.0));
  const double m = m_max + 0.5;
  direct += 2.0 * (std::log(m) + 1.0) / m;
  const auto r = exact_k2_rate();
  EXPECT_NEAR(r.h, direct, 1e-5);
  EXPECT_NEAR(2.0 * std::log(3.0) / 20.0, 2.0 * std::log1p(2.0) / (4.0 * 5.0), 1e-15);
  EXPECT_NEAR(r.h, 1.2, 0.15);
}

TEST(EntropyRate, IncreasesWithK) {
  double prev = 0.0;
  for (int k : {2, 3, 4, 8, 16}) {
    const double h = entropy_rate(k).h;
    EXPECT_GT(h, prev) << "k=" << k;
    prev = h;
  }
}

TEST(EntropyRate, ResidueApproachesRecursionAtLargeK) {
  double prev_gap = 1e9;
  for (int k : {4, 8, 16, 32}) {
    const double gap = std::abs(residue_rate(k).h - entropy_rate(k).h) / entropy_rate(k).h;
    EXPECT_LT(gap, prev_gap) << "k=" << k;
    prev_gap = gap;
  }
}

TEST(EntropyRate, LargeKExpansion) {
  for (int k : {16, 32}) {
    const double h = entropy_rate(k).h;
    EXPECT_NEAR(large_k_rate(k).h, h, 0.05 * h) << "k=" << k;
  }
  EXPECT_NEAR(large_k_rate(16).h * (harmonic_number(16) - 1.0), large_k_series_sum(16), 1e-12);
}

TEST(EntropyRate, ResiduePoles) {
  for (int k : {3, 4, 6, 10}) {
    const auto poles = residue_poles(k);
    ASSERT_EQ(poles.size(), static_cast<std::size_t>(k - 1));
    EXPECT_NEAR(poles.front().z.real(), 2.0, 1e-9) << "k=" << k;
    EXPECT_NEAR(poles.front().z.imag(), 0.0, 1e-9);
    for (const auto& p : poles) {
      std::complex<double> prod = 1.0;
      for (int m = 0; m <= k - 2; ++m) prod *= p.z + static_cast<double>(m);
      EXPECT_NEAR(std::abs(prod / std::tgamma(k + 1.0) - 1.0), 0.0, 1e-8);
    }
  }
}

TEST(Cumulants, NormalSamplesHaveNoHigherCumulants) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd(3.0, 2.0);
  std::vector<double> x(400000);
  for (auto& v : x) v = nd(rng);
  const auto g = standardized_cumulants(x, 6);
  ASSERT_EQ(g.size(), 4u);
  EXPECT_NEAR(g[0], 0.0, 0.02);
  EXPECT_NEAR(g[1], 0.0, 0.04);
  EXPECT_NEAR(g[2], 0.0, 0.3);
  EXPECT_NEAR(g[3], 0.0, 0.6);
}

TEST(Cumulants, ExponentialSkewness) {
  // Exponential: g_3 = 2, g_4 = 6.
  std::mt19937_64 rng(11);
  std::exponential_distribution<double> ed(1.0);
  std::vector<double> x(1000000);
  for (auto& v : x) v = ed(rng);
  const auto g = standardized_cumulants(x, 4);
  EXPECT_NEAR(g[0], 2.0, 0.05);
  EXPECT_NEAR(g[1], 6.0, 0.4);
}

TEST(Cumulants, FlowSlopes) {
  const std::vector<int> levels{8, 16, 32, 64};
  for (int m : {3, 4}) {
    const auto flow = cumulant_flow(4, m, levels, 400000, 2026);
    EXPECT_NEAR(flow.slope, -(m - 2) / 2.0, 0.15) << "m=" << m;
  }
}

TEST(Cumulants, SamplingIsSeedStable) {
  const auto a = sample_log_beta_product(3, 5, 10000, 9, 1);
  const auto b = sample_log_beta_product(3, 5, 10000, 9, 4);
  EXPECT_EQ(a, b);
  for (double v : a) EXPECT_LE(v, 0.0);
}

}  // namespace
}  // namespace semtree
