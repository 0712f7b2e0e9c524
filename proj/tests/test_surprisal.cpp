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
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include <semtree/surprisal.hpp>

namespace semtree {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

SurprisalSeries series(std::string id, std::vector<double> lp) { return {std::move(id), "m", {}, std::move(lp)}; }

TEST(Cumulative, HandExample) {
  const auto s = series("a", {kNaN, -1.0, -3.0, -5.0});
  const auto c = cumulative_surprisal(s);
  ASSERT_EQ(c.size(), 4u);
  EXPECT_DOUBLE_EQ(c[0].cumulative, 0.0);
  EXPECT_DOUBLE_EQ(c[1].cumulative, 1.0);
  EXPECT_DOUBLE_EQ(c.back().cumulative, 9.0);
  EXPECT_EQ(c.back().index, 4u);
  const auto with_first = series("b", {-2.0, -1.0});
  EXPECT_DOUBLE_EQ(total_surprisal(with_first), 1.0);
  EXPECT_DOUBLE_EQ(total_surprisal(with_first, true), 3.0);
}

TEST(Cumulative, NonDecreasing) {
  std::mt19937_64 rng(1);
  std::exponential_distribution<double> e(0.4);
  std::vector<double> lp{kNaN};
  for (int i = 0; i < 5000; ++i) lp.push_back(-e(rng));
  const auto c = cumulative_surprisal(series("x", lp));
  for (std::size_t i = 1; i < c.size(); ++i) ASSERT_GE(c[i].cumulative, c[i - 1].cumulative);
}

TEST(Cumulative, IidMeanRecovered) {
  std::mt19937_64 rng(2);
  std::exponential_distribution<double> e(1.0 / 2.5);
  std::vector<double> lp{kNaN};
  const int n = 100000;
  for (int i = 0; i < n; ++i) lp.push_back(-e(rng));
  EXPECT_NEAR(total_surprisal(series("x", lp)) / n, 2.5, 0.05);
}

TEST(Validate, RejectsBadSeries) {
  EXPECT_THROW(validate(series("p", {-1.0, 0.5})), InvalidSurprisal);
  EXPECT_THROW(validate(series("n", {-1.0, kNaN})), InvalidSurprisal);
  EXPECT_THROW(validate(series("i", {-1.0, -std::numeric_limits<double>::infinity()})), InvalidSurprisal);
  SurprisalSeries mismatch{"t", "m", {"a", "b"}, {-1.0}};
  EXPECT_THROW(validate(mismatch), InvalidSurprisal);
  EXPECT_NO_THROW(validate(series("ok", {kNaN, 0.0, -2.0})));
}

TEST(Json, BaseConversionAndNulls) {
  const auto j = nlohmann::json::parse(R"({"source_id":"d","model_id":"m","tokens":["a","b","c"],"logprobs":[null,-1,-2]})");
  const auto bits = surprisal_from_json(j, LogBase::two);
  EXPECT_TRUE(std::isnan(bits.token_logprobs[0]));
  EXPECT_NEAR(bits.token_logprobs[2], -2.0 * std::numbers::ln2, 1e-15);
  const auto tens = surprisal_from_json(j, log_base_from_string("10"));
  EXPECT_NEAR(tens.token_logprobs[1], -std::numbers::ln10, 1e-15);
  EXPECT_EQ(log_base_from_string("bits"), LogBase::two);
  EXPECT_THROW(log_base_from_string("3"), std::invalid_argument);
  const auto alias = surprisal_from_json(nlohmann::json::parse(R"({"token_logprobs":[-0.5]})"));
  EXPECT_DOUBLE_EQ(alias.token_logprobs[0], -0.5);
  const auto round = surprisal_from_json(to_json(bits));
  EXPECT_TRUE(std::isnan(round.token_logprobs[0]));
  EXPECT_EQ(round.tokens, bits.tokens);
}

TEST(Json, ReadJsonl) {
  std::istringstream in("{\"source_id\":\"a\",\"logprobs\":[null,-1]}\n\n{\"source_id\":\"b\",\"logprobs\":[-2]}\n");
  const auto all = read_surprisal_jsonl(in);
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[1].source_id, "b");
  std::istringstream bad("{\"source_id\":\"a\",\"logprobs\":[1]}\n");
  EXPECT_THROW(read_surprisal_jsonl(bad), InvalidSurprisal);
  std::istringstream broken("not json\n");
  EXPECT_THROW(read_surprisal_jsonl(broken), InvalidSurprisal);
}

TEST(Regression, ConstantRateIsExact) {
  std::vector<SurprisalSeries> corpus;
  for (int t = 0; t < 12; ++t) {
    std::vector<double> lp{kNaN};
    for (int i = 1; i < 50 + 37 * t; ++i) lp.push_back(-2.0);
    corpus.push_back(series("t" + std::to_string(t), lp));
  }
  const auto r = corpus_rate_regression(corpus);
  EXPECT_NEAR(r.fit.slope, 2.0, 1e-12);
  EXPECT_NEAR(r.fit.intercept, -2.0, 1e-9);  // the first token carries no surprisal
  ASSERT_EQ(r.per_text.size(), 12u);
  EXPECT_NEAR(r.per_text[3].rate, 2.0, 1e-12);
}

TEST(Regression, NoisySlopeWithinInterval) {
  std::mt19937_64 rng(5);
  std::gamma_distribution<double> g(2.0, 1.2);  // mean 2.4
  int covered = 0;
  const int reps = 40;
  for (int rep = 0; rep < reps; ++rep) {
    std::vector<SurprisalSeries> corpus;
    for (int t = 0; t < 30; ++t) {
      std::vector<double> lp{kNaN};
      const int n = 20 + static_cast<int>(rng() % 800);
      for (int i = 1; i < n; ++i) lp.push_back(-g(rng));
      corpus.push_back(series("t", lp));
    }
    const auto fit = corpus_rate_regression(corpus).fit;
    if (fit.slope_ci_low <= 2.4 && 2.4 <= fit.slope_ci_high) ++covered;
  }
  EXPECT_GE(covered, reps * 8 / 10);
}

TEST(Regression, Preconditions) {
  std::vector<SurprisalSeries> few(9, series("x", {kNaN, -1.0, -1.0}));
  EXPECT_THROW(corpus_rate_regression(few), std::invalid_argument);
  std::vector<SurprisalSeries> same(10, series("x", {kNaN, -1.0, -1.0}));
  EXPECT_THROW(corpus_rate_regression(same), std::domain_error);
  const std::vector<SurprisalSeries> three{series("a", {kNaN, -1.0}), series("b", {kNaN, -1.0, -1.0}),
                                           series("c", {kNaN, -1.0, -1.0, -1.0})};
  EXPECT_NEAR(corpus_rate_regression(three, 3).fit.slope, 1.0, 1e-12);
}

TEST(Csv, CumulativeHeader) {
  std::ostringstream os;
  const std::vector<SurprisalSeries> s{series("a", {kNaN, -1.5})};
  write_cumulative_csv(os, s);
  EXPECT_EQ(os.str(), "source_id,index,cumulative_nats\na,1,0\na,2,1.5\n");
}

}  // namespace
}  // namespace semtree
