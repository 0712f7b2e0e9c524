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

// Recursive LLM-driven segmentation of a text into a SemanticTree.

#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <future>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "llm_client.hpp"
#include "prompts.hpp"
#include "semantic_tree.hpp"
#include "text.hpp"

namespace semtree {

struct ModeThresholds {
  std::size_t paragraph_above = 200;  // more tokens than this: paragraph cut points
  std::size_t phrase_below = 6;       // fewer tokens than this: phrase cut points
};

inline ChunkMode choose_mode(std::size_t span_tokens, ModeThresholds t = {}) {
  if (span_tokens > t.paragraph_above) return ChunkMode::paragraph_cutpoint;
  if (span_tokens < t.phrase_below) return ChunkMode::phrase_cutpoint;
  return ChunkMode::main;
}

/// Splits before the space that follows '.', '!' or '?' when the next
/// character is an ASCII capital or digit. Pieces concatenate to the input.
inline std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 1; i + 1 < text.size(); ++i) {
    const char p = text[i - 1];
    if (text[i] == ' ' && (p == '.' || p == '!' || p == '?') && detail::is_ascii_upper_or_digit(text[i + 1])) {
      out.emplace_back(text.substr(start, i - start));
      start = i;
    }
  }
  if (start < text.size() || out.empty()) out.emplace_back(text.substr(start));
  return out;
}

inline bool verify(const std::vector<std::string>& chunks, std::string_view original) {
  std::size_t pos = 0;
  for (const auto& c : chunks) {
    if (original.substr(pos, c.size()) != c) return false;
    pos += c.size();
  }
  return pos == original.size();
}

class ReplyParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Removes a surrounding ``` fence (with optional language tag) if present.
inline std::string unwrap_code_fence(std::string_view raw) {
  std::size_t b = 0, e = raw.size();
  while (b < e && std::isspace(static_cast<unsigned char>(raw[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(raw[e - 1]))) --e;
  std::string_view t = raw.substr(b, e - b);
  if (t.size() >= 6 && t.substr(0, 3) == "```" && t.substr(t.size() - 3) == "```") {
    t = t.substr(3, t.size() - 6);
    const auto nl = t.find('\n');
    const std::string_view first = nl == std::string_view::npos ? t : t.substr(0, nl);
    // Drop a language tag such as "json" on the fence line.
    if (nl != std::string_view::npos && first.find_first_of("[\"") == std::string_view::npos) t = t.substr(nl + 1);
  }
  return std::string(t);
}

/// Chunk strings of a main-mode reply; empty strings are dropped.
inline std::vector<std::string> parse_chunk_reply(std::string_view raw, int k) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(unwrap_code_fence(raw));
  } catch (const nlohmann::json::exception&) {
    throw ReplyParseError("reply is not valid JSON");
  }
  if (!j.is_array()) throw ReplyParseError("reply is not a JSON array");
  std::vector<std::string> chunks;
  for (const auto& e : j) {
    if (!e.is_string()) throw ReplyParseError("reply array holds a non-string");
    auto s = e.get<std::string>();
    if (!s.empty()) chunks.push_back(std::move(s));
  }
  if (chunks.empty()) throw ReplyParseError("reply holds no chunks");
  if (chunks.size() > static_cast<std::size_t>(k))
    throw ReplyParseError("reply holds " + std::to_string(chunks.size()) + " chunks, more than K=" + std::to_string(k));
  return chunks;
}

/// Cut indices of a cut-point reply: strictly ascending, within [1, units-1], at most K-1.
inline std::vector<std::size_t> parse_cut_reply(std::string_view raw, std::size_t units, int k) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(unwrap_code_fence(raw));
  } catch (const nlohmann::json::exception&) {
    throw ReplyParseError("reply is not valid JSON");
  }
  if (!j.is_array()) throw ReplyParseError("reply is not a JSON array");
  std::vector<std::size_t> cuts;
  for (const auto& e : j) {
    if (!e.is_number_integer()) throw ReplyParseError("cut point is not an integer");
    const auto v = e.get<long long>();
    if (v < 1 || static_cast<std::size_t>(v) >= units) throw ReplyParseError("cut point out of range");
    if (!cuts.empty() && static_cast<std::size_t>(v) <= cuts.back())
      throw ReplyParseError("cut points are not strictly ascending");
    cuts.push_back(static_cast<std::size_t>(v));
  }
  if (cuts.size() + 1 > static_cast<std::size_t>(k)) throw ReplyParseError("more than K-1 cut points");
  return cuts;
}

inline std::vector<std::string> slice_units(const std::vector<std::string>& units, const std::vector<std::size_t>& cuts) {
  std::vector<std::string> out;
  std::size_t prev = 0;
  for (std::size_t c : cuts) {
    out.push_back(detail::join(units, prev, c));
    prev = c;
  }
  out.push_back(detail::join(units, prev, units.size()));
  return out;
}

/// Builds the request (prompts rendered) for one span.
inline ChunkRequest make_chunk_request(std::string_view span, const Tokenizer& tok, int k, ChunkMode mode,
                                       std::size_t token_offset = 0, int attempt = 0) {
  ChunkRequest r;
  r.span = std::string(span);
  r.tokens = tok.tokenize(span);
  r.k = k;
  r.mode = mode;
  r.token_offset = token_offset;
  r.attempt = attempt;
  const auto dump = [](const nlohmann::json& j) { return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace); };
  switch (mode) {
    case ChunkMode::paragraph_cutpoint: {
      r.sentences = split_sentences(span);
      std::string listing;
      for (std::size_t i = 0; i < r.sentences.size(); ++i) {
        std::string_view s = r.sentences[i];
        if (!s.empty() && s.front() == ' ') s.remove_prefix(1);
        if (i) listing += '\n';
        listing += "[" + std::to_string(i) + "] " + std::string(s);
      }
      r.system_prompt = prompts::fill_k(prompts::kCutPointsSystem, k);
      r.user_prompt = prompts::fill_slot(prompts::kCutPointsUser, "{sentences}", listing);
      break;
    }
    case ChunkMode::phrase_cutpoint:
      r.system_prompt = prompts::fill_k(prompts::kPhraseCutPointsSystem, k);
      r.user_prompt = prompts::fill_slot(prompts::kPhraseCutPointsUser, "{tokens}", dump({{"tokens", r.tokens}}));
      break;
    case ChunkMode::main:
    case ChunkMode::none:
      r.system_prompt = prompts::fill_k(prompts::kSegmentationSystem, k);
      r.user_prompt = prompts::fill_slot(prompts::kSegmentationUser, "{text}", dump(r.span));
      break;
  }
  return r;
}

/// Chunks of a reply to `r`, before verification. Throws ReplyParseError.
inline std::vector<std::string> chunks_from_reply(const ChunkRequest& r, std::string_view raw) {
  switch (r.mode) {
    case ChunkMode::paragraph_cutpoint:
      return slice_units(r.sentences, parse_cut_reply(raw, r.sentences.size(), r.k));
    case ChunkMode::phrase_cutpoint:
      return slice_units(r.tokens, parse_cut_reply(raw, r.tokens.size(), r.k));
    default:
      return parse_chunk_reply(raw, r.k);
  }
}

/// One prompt/parse round for a span. Throws ReplyParseError or TransportError.
inline std::vector<std::string> segment_span(std::string_view span, int k, ChunkMode mode, LlmClient& client,
                                             const Tokenizer& tok, int attempt = 0) {
  if (span.empty()) throw std::invalid_argument("segment_span: empty span");
  const auto req = make_chunk_request(span, tok, k, mode, 0, attempt);
  return chunks_from_reply(req, client.complete(req).raw);
}

struct ChunkPolicy {
  int max_retries = 3;        // re-prompts after a failed verification
  int transport_retries = 4;  // retries after transport errors, with backoff
  double backoff_ms = 500.0;
  double backoff_factor = 2.0;
  unsigned max_in_flight = 4;
  ModeThresholds thresholds;
  std::string created_at;  // recorded verbatim in the tree
};

struct Exchange {
  std::size_t token_begin = 0;
  std::size_t token_end = 0;
  ChunkMode mode = ChunkMode::main;
  int attempt = 0;
  int transport_attempt = 0;
  std::string user_prompt;
  std::string reply;
  std::string outcome;
  double latency_ms = 0.0;
};

inline nlohmann::json to_json(const Exchange& e) {
  return {{"token_range", {e.token_begin, e.token_end}},
          {"mode", std::string(to_string(e.mode))},
          {"attempt", e.attempt},
          {"transport_attempt", e.transport_attempt},
          {"user_prompt", e.user_prompt},
          {"reply", e.reply},
          {"outcome", e.outcome},
          {"latency_ms", e.latency_ms}};
}

struct BuildResult {
  SemanticTree tree;
  bool complete = true;
  std::string error;  // why construction stopped early
  std::vector<Exchange> exchanges;
  std::size_t verification_failures = 0;
  std::size_t atomic_leaves = 0;
};

namespace detail {

struct Expansion {
  SpanStatus status = SpanStatus::atomic_leaf;
  ChunkMode mode = ChunkMode::none;
  std::vector<std::size_t> cuts;  // token offsets within the span, exclusive of 0 and n
  std::vector<Exchange> log;
  std::size_t failures = 0;
  bool aborted = false;
  std::string error;
};

/// Token boundaries of the chunks, or empty if some boundary splits a token.
inline std::vector<std::size_t> align_chunks(const std::vector<std::string>& chunks,
                                             const std::vector<TokenSpan>& spans, std::size_t base) {
  std::vector<std::size_t> cuts;
  std::size_t bytes = 0, tok = 0;
  for (std::size_t c = 0; c + 1 < chunks.size(); ++c) {
    bytes += chunks[c].size();
    while (tok < spans.size() && spans[tok].end - base < bytes) ++tok;
    if (tok >= spans.size() || spans[tok].end - base != bytes) return {};
    cuts.push_back(tok + 1);
  }
  return cuts;
}

inline Expansion expand_span(const SpanNode& node, const std::vector<TokenSpan>& doc_spans, int k,
                             LlmClient& client, const Tokenizer& tok, const ChunkPolicy& policy) {
  Expansion ex;
  const std::size_t n = node.token_count();
  ChunkMode mode = choose_mode(n, policy.thresholds);
  if (mode == ChunkMode::paragraph_cutpoint && split_sentences(node.text).size() < 2) mode = ChunkMode::main;
  ex.mode = mode;
  const std::vector<TokenSpan> spans(doc_spans.begin() + static_cast<std::ptrdiff_t>(node.token_begin),
                                     doc_spans.begin() + static_cast<std::ptrdiff_t>(node.token_end));
  const std::size_t base = spans.front().begin;

  for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
    auto req = make_chunk_request(node.text, tok, k, mode, node.token_begin, attempt);
    ChunkResponse resp;
    bool got = false;
    for (int t = 0; t <= policy.transport_retries; ++t) {
      req.transport_attempt = t;
      Exchange log{node.token_begin, node.token_end, mode, attempt, t, req.user_prompt, {}, {}, 0.0};
      try {
        resp = client.complete(req);
        log.reply = resp.raw;
        log.latency_ms = resp.latency_ms;
        ex.log.push_back(std::move(log));
        got = true;
        break;
      } catch (const TransportError& e) {
        log.outcome = std::string("transport-error: ") + e.what();
        ex.log.push_back(std::move(log));
        if (t == policy.transport_retries) {
          ex.aborted = true;
          ex.error = e.what();
          return ex;
        }
        const double wait = policy.backoff_ms * std::pow(policy.backoff_factor, t);
        if (wait > 0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(wait));
      } catch (const ClientConfigError& e) {
        log.outcome = std::string("client-error: ") + e.what();
        ex.log.push_back(std::move(log));
        ex.aborted = true;
        ex.error = e.what();
        return ex;
      }
    }
    if (!got) break;
    auto& log = ex.log.back();
    std::vector<std::string> chunks;
    try {
      chunks = chunks_from_reply(req, resp.raw);
    } catch (const ReplyParseError& e) {
      log.outcome = std::string("parse-error: ") + e.what();
      ++ex.failures;
      continue;
    }
    if (!verify(chunks, node.text)) {
      log.outcome = "verify-failed";
      ++ex.failures;
      continue;
    }
    if (chunks.size() == 1) {
      log.outcome = "single-chunk";
      ex.status = SpanStatus::atomic_leaf;
      return ex;
    }
    auto cuts = align_chunks(chunks, spans, base);
    if (cuts.empty()) {
      log.outcome = "misaligned";
      ++ex.failures;
      continue;
    }
    log.outcome = "accepted";
    ex.status = SpanStatus::internal;
    ex.cuts = std::move(cuts);
    return ex;
  }
  ex.status = SpanStatus::atomic_leaf;
  return ex;
}

}  // namespace detail

/// Recursive descent to single tokens, level by level. Spans of one level are
/// requested concurrently (at most policy.max_in_flight at a time); the tree
/// is assembled by position, so the result does not depend on timing.
inline BuildResult build_semantic_tree(std::string_view text, int k, LlmClient& client, const ChunkPolicy& policy = {},
                                       std::shared_ptr<const Tokenizer> tokenizer = nullptr,
                                       std::string source_id = {}) {
  if (text.empty()) throw std::invalid_argument("build_semantic_tree: empty text");
  if (k < 2) throw std::invalid_argument("build_semantic_tree: k must be >= 2");
  if (!tokenizer) tokenizer = make_tokenizer();
  const auto doc_spans = tokenizer->spans(text);

  BuildResult result;
  SemanticTree& tree = result.tree;
  tree.source_id = std::move(source_id);
  tree.k = k;
  tree.tokenizer_id = tokenizer->id();
  tree.model_id = client.model_id();
  tree.created_at = policy.created_at;
  tree.root.text = std::string(text);
  tree.root.token_begin = 0;
  tree.root.token_end = doc_spans.size();

  std::vector<SpanNode*> frontier{&tree.root};
  const unsigned batch = std::max(1u, policy.max_in_flight);
  while (!frontier.empty()) {
    std::vector<SpanNode*> next;
    for (std::size_t b = 0; b < frontier.size(); b += batch) {
      const std::size_t e = std::min(frontier.size(), b + batch);
      std::vector<std::future<detail::Expansion>> jobs;
      std::vector<detail::Expansion> done(e - b);
      std::vector<bool> async_slot(e - b, false);
      for (std::size_t i = b; i < e; ++i) {
        SpanNode* node = frontier[i];
        if (node->token_count() == 1) {
          node->status = SpanStatus::token_leaf;
          node->mode_used = ChunkMode::none;
          continue;
        }
        async_slot[i - b] = true;
        if (batch == 1) {
          done[i - b] = detail::expand_span(*node, doc_spans, k, client, *tokenizer, policy);
        } else {
          jobs.push_back(std::async(std::launch::async, [&, node] {
            return detail::expand_span(*node, doc_spans, k, client, *tokenizer, policy);
          }));
        }
      }
      if (batch > 1) {
        std::size_t j = 0;
        for (std::size_t i = 0; i < done.size(); ++i)
          if (async_slot[i]) done[i] = jobs[j++].get();
      }
      for (std::size_t i = b; i < e; ++i) {
        if (!async_slot[i - b]) continue;
        auto& ex = done[i - b];
        SpanNode* node = frontier[i];
        result.verification_failures += ex.failures;
        for (auto& l : ex.log) result.exchanges.push_back(std::move(l));
        if (ex.aborted) {
          if (result.complete) result.error = ex.error;
          result.complete = false;
          continue;  // node stays unexpanded
        }
        node->mode_used = ex.mode;
        node->status = ex.status;
        if (ex.status == SpanStatus::atomic_leaf) {
          ++result.atomic_leaves;
          continue;
        }
        std::size_t prev = 0;
        auto bounds = ex.cuts;
        bounds.push_back(node->token_count());
        const std::size_t base = doc_spans[node->token_begin].begin;
        for (std::size_t c : bounds) {
          SpanNode child;
          child.token_begin = node->token_begin + prev;
          child.token_end = node->token_begin + c;
          const std::size_t from = doc_spans[child.token_begin].begin - base;
          const std::size_t to = doc_spans[child.token_end - 1].end - base;
          child.text = node->text.substr(from, to - from);
          node->children.push_back(std::move(child));
          prev = c;
        }
      }
      if (!result.complete) break;
    }
    if (!result.complete) break;
    for (SpanNode* node : frontier)
      for (auto& c : node->children) next.push_back(&c);
    frontier = std::move(next);
  }
  return result;
}

}  // namespace semtree
