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

// Per-token LLM surprisal: ingestion, cumulative curves and the corpus
// cross-entropy-rate regression.

#pragma once

#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "numeric.hpp"

namespace semtree {

/// Natural-log token log-probabilities of one text. A NaN first entry marks an
/// unconditioned first token.
struct SurprisalSeries {
  std::string source_id;
  std::string model_id;
  std::vector<std::string> tokens;  // may be empty when only numbers were supplied
  std::vector<double> token_logprobs;

  std::size_t size() const noexcept { return token_logprobs.size(); }
};

class InvalidSurprisal : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class LogBase { e, two, ten };

inline LogBase log_base_from_string(std::string_view s) {
  if (s == "e" || s == "nats") return LogBase::e;
  if (s == "2" || s == "bits") return LogBase::two;
  if (s == "10") return LogBase::ten;
  throw std::invalid_argument("unknown log base: " + std::string(s));
}

/// Factor turning a log in `base` into nats.
inline double to_nats_factor(LogBase base) {
  switch (base) {
    case LogBase::e: return 1.0;
    case LogBase::two: return std::numbers::ln2;
    case LogBase::ten: return std::numbers::ln10;
  }
  return 1.0;
}

/// Checks sign and sentinel placement; throws InvalidSurprisal.
inline void validate(const SurprisalSeries& s) {
  if (!s.tokens.empty() && s.tokens.size() != s.token_logprobs.size())
    throw InvalidSurprisal(s.source_id + ": token and logprob counts differ");
  for (std::size_t i = 0; i < s.token_logprobs.size(); ++i) {
    const double v = s.token_logprobs[i];
    if (std::isnan(v)) {
      if (i != 0) throw InvalidSurprisal(s.source_id + ": missing logprob at token " + std::to_string(i));
      continue;
    }
    if (v > 0.0) throw InvalidSurprisal(s.source_id + ": positive logprob at token " + std::to_string(i));
    if (!std::isfinite(v)) throw InvalidSurprisal(s.source_id + ": non-finite logprob at token " + std::to_string(i));
  }
}

/// Record: {"source_id", "model_id", "tokens": [...], "logprobs": [...]};
/// "token_logprobs" is accepted as an alias; null entries become NaN.
inline SurprisalSeries surprisal_from_json(const nlohmann::json& j, LogBase base = LogBase::e) {
  SurprisalSeries s;
  s.source_id = j.value("source_id", std::string());
  s.model_id = j.value("model_id", std::string());
  if (const auto it = j.find("tokens"); it != j.end())
    for (const auto& t : *it) s.tokens.push_back(t.get<std::string>());
  const auto lp = j.contains("logprobs") ? j.at("logprobs") : j.at("token_logprobs");
  const double f = to_nats_factor(base);
  for (const auto& v : lp)
    s.token_logprobs.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>() * f);
  validate(s);
  return s;
}

inline nlohmann::json to_json(const SurprisalSeries& s) {
  nlohmann::json lp = nlohmann::json::array();
  for (double v : s.token_logprobs) lp.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
  return {{"source_id", s.source_id}, {"model_id", s.model_id}, {"tokens", s.tokens}, {"logprobs", lp}};
}

/// Reads line-delimited records; blank lines are skipped.
inline std::vector<SurprisalSeries> read_surprisal_jsonl(std::istream& in, LogBase base = LogBase::e) {
  std::vector<SurprisalSeries> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(surprisal_from_json(nlohmann::json::parse(line), base));
    } catch (const nlohmann::json::exception& e) {
      throw InvalidSurprisal("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

struct SurprisalPoint {
  std::size_t index = 0;  // 1-based token position
  double cumulative = 0.0;
};

/// Prefix sums of -log P. The first token is excluded unless include_first.
inline std::vector<SurprisalPoint> cumulative_surprisal(const SurprisalSeries& s, bool include_first = false) {
  validate(s);
  std::vector<SurprisalPoint> out;
  out.reserve(s.size());
  CompensatedSum acc;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double v = s.token_logprobs[i];
    if ((i > 0 || include_first) && !std::isnan(v)) acc.add(-v);
    out.push_back({i + 1, acc.value()});
  }
  return out;
}

inline double total_surprisal(const SurprisalSeries& s, bool include_first = false) {
  const auto c = cumulative_surprisal(s, include_first);
  return c.empty() ? 0.0 : c.back().cumulative;
}

struct TextRate {
  std::string source_id;
  std::size_t tokens = 0;
  double total = 0.0;  // nats
  double rate = 0.0;   // total / conditioned tokens
};

struct RateRegression {
  LinearFit fit;  // total surprisal = intercept + slope * N
  std::vector<TextRate> per_text;
};

/// OLS of total surprisal against token count across texts, free intercept.
inline RateRegression corpus_rate_regression(std::span<const SurprisalSeries> series, std::size_t min_series = 10,
                                             bool include_first = false) {
  if (series.size() < min_series)
    throw std::invalid_argument("corpus_rate_regression: need at least " + std::to_string(min_series) +
                                " texts, got " + std::to_string(series.size()));
  RateRegression r;
  std::vector<double> x, y;
  for (const auto& s : series) {
    const double total = total_surprisal(s, include_first);
    const std::size_t conditioned = include_first ? s.size() : (s.size() > 0 ? s.size() - 1 : 0);
    r.per_text.push_back({s.source_id, s.size(), total, conditioned ? total / static_cast<double>(conditioned) : 0.0});
    x.push_back(static_cast<double>(s.size()));
    y.push_back(total);
  }
  r.fit = least_squares(x, y);
  return r;
}

/// CSV: source_id,index,cumulative_nats
inline void write_cumulative_csv(std::ostream& os, std::span<const SurprisalSeries> series, bool include_first = false) {
  os << "source_id,index,cumulative_nats\n";
  const auto old = os.precision(17);
  for (const auto& s : series)
    for (const auto& p : cumulative_surprisal(s, include_first)) os << s.source_id << ',' << p.index << ',' << p.cumulative << '\n';
  os.precision(old);
}

}  // namespace semtree
