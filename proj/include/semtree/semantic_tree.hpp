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

// Empirical chunk trees over a text and their conversion to size trees.

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "llm_client.hpp"
#include "model_tree.hpp"

namespace semtree {

enum class SpanStatus {
  internal,
  token_leaf,
  atomic_leaf,  // split failed or the model returned a single chunk
  unexpanded,   // construction aborted before this span was processed
};

inline std::string_view to_string(SpanStatus s) {
  switch (s) {
    case SpanStatus::internal: return "internal";
    case SpanStatus::token_leaf: return "token-leaf";
    case SpanStatus::atomic_leaf: return "atomic-leaf";
    case SpanStatus::unexpanded: return "unexpanded";
  }
  return "?";
}

inline SpanStatus span_status_from_string(std::string_view s) {
  if (s == "internal") return SpanStatus::internal;
  if (s == "token-leaf") return SpanStatus::token_leaf;
  if (s == "atomic-leaf") return SpanStatus::atomic_leaf;
  if (s == "unexpanded") return SpanStatus::unexpanded;
  throw std::invalid_argument("unknown span status: " + std::string(s));
}

struct SpanNode {
  std::string text;
  std::size_t token_begin = 0;  // half-open token range
  std::size_t token_end = 0;
  std::vector<SpanNode> children;
  SpanStatus status = SpanStatus::unexpanded;
  ChunkMode mode_used = ChunkMode::none;

  std::size_t token_count() const noexcept { return token_end - token_begin; }
};

struct SemanticTree {
  std::string source_id;
  int k = 2;
  SpanNode root;
  std::string tokenizer_id;
  std::string model_id;
  std::string created_at;

  std::size_t token_count() const noexcept { return root.token_count(); }
};

class InvalidSemanticTree : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void validate_span(const SpanNode& n, int k) {
  if (n.token_end <= n.token_begin) throw InvalidSemanticTree("span with no tokens: \"" + n.text.substr(0, 40) + "\"");
  if (n.status == SpanStatus::token_leaf && n.token_count() != 1)
    throw InvalidSemanticTree("token leaf covering " + std::to_string(n.token_count()) + " tokens");
  if (n.status != SpanStatus::internal) {
    if (!n.children.empty()) throw InvalidSemanticTree("leaf span with children");
    return;
  }
  if (n.children.size() < 2 || n.children.size() > static_cast<std::size_t>(k))
    throw InvalidSemanticTree("internal span with " + std::to_string(n.children.size()) + " children (K=" +
                              std::to_string(k) + ")");
  std::string cat;
  std::size_t expect = n.token_begin;
  for (const auto& c : n.children) {
    if (c.token_begin != expect) throw InvalidSemanticTree("child token ranges do not tile the parent");
    expect = c.token_end;
    cat += c.text;
  }
  if (expect != n.token_end) throw InvalidSemanticTree("child token ranges do not cover the parent");
  if (cat != n.text) throw InvalidSemanticTree("children do not concatenate to the parent text");
  for (const auto& c : n.children) validate_span(c, k);
}

inline void collect_leaves(const SpanNode& n, std::string& out) {
  if (n.children.empty()) {
    out += n.text;
    return;
  }
  for (const auto& c : n.children) collect_leaves(c, out);
}

}  // namespace detail

/// Checks every structural invariant; throws InvalidSemanticTree.
inline void validate(const SemanticTree& t) {
  if (t.root.token_begin != 0) throw InvalidSemanticTree("root token range must start at 0");
  detail::validate_span(t.root, t.k);
}

/// Ordered concatenation of leaf texts.
inline std::string leaf_text(const SemanticTree& t) {
  std::string out;
  detail::collect_leaves(t.root, out);
  return out;
}

/// Token counts replace spans; internal nodes get K slots with zero-size
/// padding at the tail; atomic leaves become absorbed nodes.
inline ModelTree to_model_sizes(const SemanticTree& t) {
  std::vector<ModelTree::Node> nodes;
  auto visit = [&](auto&& self, const SpanNode& n) -> void {
    ModelTree::Node m;
    m.size = n.token_count();
    switch (n.status) {
      case SpanStatus::internal: m.status = NodeStatus::split; break;
      case SpanStatus::token_leaf: m.status = NodeStatus::token_leaf; break;
      case SpanStatus::atomic_leaf: m.status = NodeStatus::absorbed; break;
      case SpanStatus::unexpanded: m.status = NodeStatus::truncated; break;
    }
    if (m.status == NodeStatus::absorbed && m.size == 1) m.status = NodeStatus::token_leaf;
    m.child_count = n.status == SpanStatus::internal ? static_cast<std::uint32_t>(t.k) : 0;
    nodes.push_back(m);
    if (n.status != SpanStatus::internal) return;
    for (const auto& c : n.children) self(self, c);
    for (std::size_t pad = n.children.size(); pad < static_cast<std::size_t>(t.k); ++pad)
      nodes.push_back(ModelTree::Node{0, NodeStatus::absorbed, 0, 1});
  };
  visit(visit, t.root);
  ModelTree::fill_extents(nodes);
  ModelTree out(t.token_count(), t.k, std::move(nodes));
  out.validate();
  return out;
}

// Persistence: {"format":"semtree.semantic-tree/1", source_id, k, tokenizer_id,
// model_id, created_at, root:{text, token_range:[b,e], status, mode_used, children}}

inline nlohmann::json to_json(const SpanNode& n) {
  nlohmann::json j{{"text", n.text},
                   {"token_range", {n.token_begin, n.token_end}},
                   {"status", std::string(to_string(n.status))},
                   {"mode_used", std::string(to_string(n.mode_used))}};
  if (!n.children.empty()) {
    auto arr = nlohmann::json::array();
    for (const auto& c : n.children) arr.push_back(to_json(c));
    j["children"] = std::move(arr);
  }
  return j;
}

inline nlohmann::json to_json(const SemanticTree& t) {
  return {{"format", "semtree.semantic-tree/1"},
          {"source_id", t.source_id},
          {"k", t.k},
          {"tokenizer_id", t.tokenizer_id},
          {"model_id", t.model_id},
          {"created_at", t.created_at},
          {"root", to_json(t.root)}};
}

inline SpanNode span_node_from_json(const nlohmann::json& j) {
  SpanNode n;
  n.text = j.at("text").get<std::string>();
  n.token_begin = j.at("token_range").at(0).get<std::size_t>();
  n.token_end = j.at("token_range").at(1).get<std::size_t>();
  n.status = span_status_from_string(j.at("status").get<std::string>());
  n.mode_used = chunk_mode_from_string(j.at("mode_used").get<std::string>());
  if (const auto it = j.find("children"); it != j.end())
    for (const auto& c : *it) n.children.push_back(span_node_from_json(c));
  return n;
}

inline SemanticTree semantic_tree_from_json(const nlohmann::json& j) {
  SemanticTree t;
  t.source_id = j.at("source_id").get<std::string>();
  t.k = j.at("k").get<int>();
  t.tokenizer_id = j.at("tokenizer_id").get<std::string>();
  t.model_id = j.at("model_id").get<std::string>();
  t.created_at = j.value("created_at", std::string());
  t.root = span_node_from_json(j.at("root"));
  validate(t);
  return t;
}

/// Serialized form used for files; stable key order and formatting.
inline std::string dump_tree(const SemanticTree& t) {
  return to_json(t).dump(1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
}

}  // namespace semtree
