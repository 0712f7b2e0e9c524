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

// Chunking client interface and offline mock clients.

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace semtree {

enum class ChunkMode { main, paragraph_cutpoint, phrase_cutpoint, none };

inline std::string_view to_string(ChunkMode m) {
  switch (m) {
    case ChunkMode::main: return "main";
    case ChunkMode::paragraph_cutpoint: return "paragraph-cutpoint";
    case ChunkMode::phrase_cutpoint: return "phrase-cutpoint";
    case ChunkMode::none: return "none";
  }
  return "?";
}

inline ChunkMode chunk_mode_from_string(std::string_view s) {
  if (s == "main") return ChunkMode::main;
  if (s == "paragraph-cutpoint") return ChunkMode::paragraph_cutpoint;
  if (s == "phrase-cutpoint") return ChunkMode::phrase_cutpoint;
  if (s == "none") return ChunkMode::none;
  throw std::invalid_argument("unknown chunk mode: " + std::string(s));
}

struct ChunkRequest {
  std::string span;
  std::vector<std::string> tokens;     // tokens of the span, always filled
  std::vector<std::string> sentences;  // filled in paragraph-cutpoint mode
  std::size_t token_offset = 0;        // index of the span's first token in the document
  int k = 2;
  ChunkMode mode = ChunkMode::main;
  int attempt = 0;            // verification attempt, 0-based
  int transport_attempt = 0;  // retry count after transport errors
  std::string system_prompt;
  std::string user_prompt;
};

struct ChunkResponse {
  std::string raw;
  double latency_ms = 0.0;
};

/// Retryable failure talking to the model endpoint.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-retryable client misconfiguration (bad URL, missing key, 4xx).
class ClientConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Must be safe to call from several threads at once.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual ChunkResponse complete(const ChunkRequest& request) = 0;
  virtual std::string model_id() const = 0;
};

/// Adapts a callable; handy for tests and scripted replies.
class FunctionClient final : public LlmClient {
 public:
  using Fn = std::function<ChunkResponse(const ChunkRequest&)>;
  FunctionClient(Fn fn, std::string model = "function") : fn_(std::move(fn)), model_(std::move(model)) {}
  ChunkResponse complete(const ChunkRequest& r) override { return fn_(r); }
  std::string model_id() const override { return model_; }

 private:
  Fn fn_;
  std::string model_;
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string join(const std::vector<std::string>& parts, std::size_t b, std::size_t e) {
  std::string out;
  for (std::size_t i = b; i < e; ++i) out += parts[i];
  return out;
}

/// Byte offset at which each sentence starts, plus the total length.
inline std::vector<std::size_t> sentence_offsets(const std::vector<std::string>& sentences) {
  std::vector<std::size_t> off{0};
  for (const auto& s : sentences) off.push_back(off.back() + s.size());
  return off;
}

}  // namespace detail

/// Always halves the span at its middle token boundary (or the sentence
/// boundary closest to it in paragraph mode).
class MockBisectClient final : public LlmClient {
 public:
  ChunkResponse complete(const ChunkRequest& r) override {
    const std::size_t n = r.tokens.size();
    nlohmann::json reply = nlohmann::json::array();
    switch (r.mode) {
      case ChunkMode::main:
        if (n < 2) {
          reply.push_back(r.span);
        } else {
          reply.push_back(detail::join(r.tokens, 0, n / 2));
          reply.push_back(detail::join(r.tokens, n / 2, n));
        }
        break;
      case ChunkMode::phrase_cutpoint:
        if (n >= 2) reply.push_back(n / 2);
        break;
      case ChunkMode::paragraph_cutpoint: {
        const std::size_t mid_bytes = detail::join(r.tokens, 0, n / 2).size();
        const auto off = detail::sentence_offsets(r.sentences);
        std::size_t best = 0, best_gap = SIZE_MAX;
        for (std::size_t i = 1; i + 1 < off.size(); ++i) {
          const std::size_t gap = off[i] > mid_bytes ? off[i] - mid_bytes : mid_bytes - off[i];
          if (gap < best_gap) {
            best_gap = gap;
            best = i;
          }
        }
        if (best > 0) reply.push_back(best);
        break;
      }
      case ChunkMode::none: break;
    }
    return {reply.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace), 0.0};
  }
  std::string model_id() const override { return "mock-bisect"; }
};

struct MockRandomOptions {
  double p_single = 0.05;     // reply with the whole span as one chunk
  double p_malformed = 0.0;   // reply that is not a JSON array
  double p_corrupt = 0.0;     // drop one byte from one chunk
  double p_misaligned = 0.0;  // cut inside a token
  double p_transport = 0.0;   // throw TransportError
};

/// Seeded random splitter. Every reply is a pure function of (seed, span
/// position, span text, mode, attempt), so results do not depend on call order.
class MockRandomClient final : public LlmClient {
 public:
  explicit MockRandomClient(std::uint64_t seed, MockRandomOptions opts = {}) : seed_(seed), opts_(opts) {}

  ChunkResponse complete(const ChunkRequest& r) override {
    std::uint64_t h = detail::fnv1a(r.span, seed_ * 0x9e3779b97f4a7c15ull + 1);
    h = detail::fnv1a(std::to_string(r.token_offset) + "/" + std::to_string(r.attempt) + "/" +
                          std::to_string(r.transport_attempt) + "/" + std::string(to_string(r.mode)),
                      h);
    std::mt19937_64 rng(h);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng) < opts_.p_transport) throw TransportError("mock transport failure");
    if (u(rng) < opts_.p_malformed) return {"Sure! Here are the segments:", 0.0};

    const std::size_t n = r.tokens.size();
    const std::size_t units = r.mode == ChunkMode::paragraph_cutpoint ? r.sentences.size() : n;
    std::vector<std::size_t> cuts;
    if (units >= 2 && u(rng) >= opts_.p_single) {
      const std::size_t max_parts = std::min<std::size_t>(static_cast<std::size_t>(r.k), units);
      std::uniform_int_distribution<std::size_t> parts_dist(2, max_parts);
      const std::size_t parts = parts_dist(rng);
      std::vector<std::size_t> pool(units - 1);
      for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i + 1;
      std::shuffle(pool.begin(), pool.end(), rng);
      cuts.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(parts - 1));
      std::sort(cuts.begin(), cuts.end());
    }
    if (r.mode != ChunkMode::main) return {nlohmann::json(cuts).dump(), 0.0};

    std::vector<std::string> chunks;
    std::size_t prev = 0;
    for (std::size_t c : cuts) {
      chunks.push_back(detail::join(r.tokens, prev, c));
      prev = c;
    }
    chunks.push_back(detail::join(r.tokens, prev, n));
    if (chunks.size() >= 2 && u(rng) < opts_.p_misaligned) {
      // Move one byte across the first boundary.
      if (chunks[0].size() >= 2) {
        chunks[1].insert(chunks[1].begin(), chunks[0].back());
        chunks[0].pop_back();
      }
    }
    if (u(rng) < opts_.p_corrupt) {
      std::uniform_int_distribution<std::size_t> which(0, chunks.size() - 1);
      auto& c = chunks[which(rng)];
      if (!c.empty()) c.erase(c.begin() + static_cast<std::ptrdiff_t>(rng() % c.size()));
    }
    return {nlohmann::json(chunks).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace), 0.0};
  }

  std::string model_id() const override { return "mock-random-" + std::to_string(seed_); }

 private:
  std::uint64_t seed_;
  MockRandomOptions opts_;
};

}  // namespace semtree
