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

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace semtree {

enum class NodeStatus : std::uint8_t {
  split,      // sampled a K-way composition
  absorbed,   // stops: empty slot, equal to its parent, or atomic multi-token leaf
  token_leaf, // single token
  truncated,  // left unexpanded by a depth-limited sample
};

inline std::string_view to_string(NodeStatus s) {
  switch (s) {
    case NodeStatus::split: return "split";
    case NodeStatus::absorbed: return "absorbed";
    case NodeStatus::token_leaf: return "token-leaf";
    case NodeStatus::truncated: return "truncated";
  }
  return "?";
}

inline NodeStatus node_status_from_string(std::string_view s) {
  if (s == "split") return NodeStatus::split;
  if (s == "absorbed") return NodeStatus::absorbed;
  if (s == "token-leaf") return NodeStatus::token_leaf;
  if (s == "truncated") return NodeStatus::truncated;
  throw std::invalid_argument("unknown node status: " + std::string(s));
}

class MalformedTree : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One realization of the splitting process, nodes stored in pre-order.
///
/// The children of node i start at i+1; each next sibling sits `extent`
/// entries after the previous one.
class ModelTree {
 public:
  struct Node {
    std::uint64_t size = 0;
    NodeStatus status = NodeStatus::token_leaf;
    std::uint32_t child_count = 0;
    std::uint32_t extent = 1;  // nodes in this subtree, itself included
  };

  ModelTree() = default;
  ModelTree(std::uint64_t root_size, int k, std::vector<Node> nodes, std::optional<std::uint64_t> seed = {})
      : root_size_(root_size), k_(k), nodes_(std::move(nodes)), seed_(seed) {}

  std::uint64_t root_size() const noexcept { return root_size_; }
  int k() const noexcept { return k_; }
  const std::optional<std::uint64_t>& seed() const noexcept { return seed_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& operator[](std::size_t i) const { return nodes_.at(i); }

  std::vector<std::size_t> children(std::size_t i) const {
    std::vector<std::size_t> out;
    out.reserve(nodes_[i].child_count);
    std::size_t c = i + 1;
    for (std::uint32_t j = 0; j < nodes_[i].child_count; ++j) {
      out.push_back(c);
      c += nodes_[c].extent;
    }
    return out;
  }

  /// Depth of each node, root = level 1.
  std::vector<int> levels() const {
    std::vector<int> lv(nodes_.size(), 0);
    if (nodes_.empty()) return lv;
    lv[0] = 1;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      std::size_t c = i + 1;
      for (std::uint32_t j = 0; j < nodes_[i].child_count; ++j) {
        lv[c] = lv[i] + 1;
        c += nodes_[c].extent;
      }
    }
    return lv;
  }

  bool is_truncated() const {
    for (const auto& n : nodes_)
      if (n.status == NodeStatus::truncated) return true;
    return false;
  }

  std::uint64_t leaf_size_total() const {
    std::uint64_t s = 0;
    for (const auto& n : nodes_)
      if (n.child_count == 0) s += n.size;
    return s;
  }

  /// Checks the structural invariants; throws MalformedTree on violation.
  void validate() const {
    if (nodes_.empty()) throw MalformedTree("tree has no nodes");
    if (nodes_[0].size != root_size_) throw MalformedTree("root size does not match root_size");
    if (nodes_[0].extent != nodes_.size()) throw MalformedTree("root extent does not cover the tree");
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Node& n = nodes_[i];
      if (n.status == NodeStatus::split) {
        if (n.size < 2) throw MalformedTree("split node of size < 2 at index " + std::to_string(i));
        if (n.child_count == 0 || static_cast<int>(n.child_count) > k_)
          throw MalformedTree("split node with " + std::to_string(n.child_count) + " children at index " +
                              std::to_string(i));
      } else if (n.child_count != 0) {
        throw MalformedTree("non-split node with children at index " + std::to_string(i));
      }
      if (n.status == NodeStatus::token_leaf && n.size != 1)
        throw MalformedTree("token leaf of size " + std::to_string(n.size));
      std::uint64_t sum = 0;
      std::uint64_t ext = 1;
      std::size_t c = i + 1;
      for (std::uint32_t j = 0; j < n.child_count; ++j) {
        if (c >= nodes_.size()) throw MalformedTree("child index out of range");
        const Node& ch = nodes_[c];
        sum += ch.size;
        ext += ch.extent;
        if (ch.size == n.size && ch.status == NodeStatus::split)
          throw MalformedTree("child equal to its parent must be absorbed (index " + std::to_string(c) + ")");
        c += ch.extent;
      }
      if (n.child_count > 0 && sum != n.size)
        throw MalformedTree("children sizes sum to " + std::to_string(sum) + " but parent has size " +
                            std::to_string(n.size) + " (index " + std::to_string(i) + ")");
      if (ext != n.extent) throw MalformedTree("extent mismatch at index " + std::to_string(i));
    }
  }

  /// Recomputes `extent` fields from child counts (reverse pre-order pass).
  static void fill_extents(std::vector<Node>& nodes) {
    std::vector<std::uint32_t> stack;
    for (std::size_t i = nodes.size(); i-- > 0;) {
      std::uint32_t ext = 1;
      for (std::uint32_t j = 0; j < nodes[i].child_count; ++j) {
        if (stack.empty()) throw MalformedTree("child count exceeds available nodes");
        ext += stack.back();
        stack.pop_back();
      }
      nodes[i].extent = ext;
      stack.push_back(ext);
    }
    if (stack.size() != 1 && !nodes.empty()) throw MalformedTree("node list is not a single tree");
  }

  friend bool operator==(const ModelTree& a, const ModelTree& b) {
    if (a.root_size_ != b.root_size_ || a.k_ != b.k_ || a.nodes_.size() != b.nodes_.size()) return false;
    for (std::size_t i = 0; i < a.nodes_.size(); ++i) {
      const auto &x = a.nodes_[i], &y = b.nodes_[i];
      if (x.size != y.size || x.status != y.status || x.child_count != y.child_count) return false;
    }
    return true;
  }

 private:
  std::uint64_t root_size_ = 0;
  int k_ = 2;
  std::vector<Node> nodes_;
  std::optional<std::uint64_t> seed_;
};

// Persistence: {"format":"semtree.model-tree/1","k":..,"root_size":..,"seed":..,
//               "root":{"size":..,"status":..,"children":[...]}}

inline nlohmann::json node_to_json(const ModelTree& t, std::size_t i) {
  const auto& n = t[i];
  nlohmann::json j{{"size", n.size}, {"status", std::string(to_string(n.status))}};
  if (n.child_count > 0) {
    auto arr = nlohmann::json::array();
    for (std::size_t c : t.children(i)) arr.push_back(node_to_json(t, c));
    j["children"] = std::move(arr);
  }
  return j;
}

inline nlohmann::json to_json(const ModelTree& t) {
  nlohmann::json j{{"format", "semtree.model-tree/1"}, {"k", t.k()}, {"root_size", t.root_size()}};
  j["seed"] = t.seed() ? nlohmann::json(*t.seed()) : nlohmann::json(nullptr);
  j["root"] = t.size() ? node_to_json(t, 0) : nlohmann::json(nullptr);
  return j;
}

namespace detail {
inline void append_nodes(const nlohmann::json& j, std::vector<ModelTree::Node>& out) {
  ModelTree::Node n;
  n.size = j.at("size").get<std::uint64_t>();
  n.status = node_status_from_string(j.at("status").get<std::string>());
  const auto it = j.find("children");
  const bool has_children = it != j.end() && it->is_array();
  n.child_count = has_children ? static_cast<std::uint32_t>(it->size()) : 0;
  out.push_back(n);
  if (has_children)
    for (const auto& c : *it) append_nodes(c, out);
}
}  // namespace detail

inline ModelTree model_tree_from_json(const nlohmann::json& j) {
  std::vector<ModelTree::Node> nodes;
  detail::append_nodes(j.at("root"), nodes);
  ModelTree::fill_extents(nodes);
  std::optional<std::uint64_t> seed;
  if (j.contains("seed") && !j.at("seed").is_null()) seed = j.at("seed").get<std::uint64_t>();
  ModelTree t(j.at("root_size").get<std::uint64_t>(), j.at("k").get<int>(), std::move(nodes), seed);
  t.validate();
  return t;
}

}  // namespace semtree
