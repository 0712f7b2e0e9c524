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

#include <atomic>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include <semtree/chunker.hpp>
#include <semtree/tree_ensemble.hpp>

namespace semtree {
namespace {

const char* const kTinyStory =
    "Once there was a little girl who found a hidden band. She was so excited and took it with her to show her "
    "friends. When she showed it to her friends, they all wanted to play with it. But when the band got too close "
    "to the sun, it started to melt! All of the kids were so sad because the band was gone. But then one of them "
    "had an idea. They used their markers and colored paper to make a new band. It wasn't as nice as the first, "
    "but it was still fun to play with! The little girl was so glad that they found a way to make a new band and "
    "they still had lots of fun!";

const char* const kRedditStory =
    "They depict heaven in all white in the books; the clouds, the Greek architecture, the angels in robes. White "
    "is the\ncolor of unity, the combination of all the colors of the visible spectrum. Heaven was white too, in a "
    "sense.\n\nI woke up to a different type of white.\n\nYou're back. Well of course I am. Hugs all around. It was "
    "pleasant, reflecting a bit of heaven on Earth. That's what\nheaven was. Love. A feeling of completeness. Love "
    "makes us complete, that's what it is. We were all pieces of the puzzle\nto a greater whole.\n\nI can feel the "
    "warmth of everyone in the room. Yet I still feel the emptiness. Well of course I do. We humans can only\nconvey "
    "a small portion of our feelings to one another. It was different in heaven. There was no you or I. Just "
    "us.\nSharing is caring they say. Many who say it don't realize the strength that the quote carries.\n\nMy wife "
    "rushes into the room in her work clothes. Eyes drenched with tears. She hugs me and I can simultaneously "
    "feel\nthe warmth of her body and the wetness of the tears.\n\nI'm glad you're still here.\n";

ChunkPolicy fast_policy(unsigned in_flight = 1) {
  ChunkPolicy p;
  p.backoff_ms = 0.0;
  p.max_in_flight = in_flight;
  p.created_at = "2026-01-01T00:00:00Z";
  return p;
}

// Random sanitized prose: sentences of random words, occasionally long.
std::string random_doc(std::mt19937_64& rng) {
  static const std::vector<std::string> words = {"the", "cat", "sat", "on", "a", "mat", "and", "then", "ran",
                                                 "far", "away", "from", "home", "while", "it", "rained", "é", "42"};
  std::uniform_int_distribution<int> nsent(1, 6), nword(1, 14), pick(0, static_cast<int>(words.size()) - 1);
  std::uniform_int_distribution<int> punct(0, 5);
  std::string out;
  const int sentences = (rng() % 20 == 0) ? 30 : nsent(rng);
  for (int s = 0; s < sentences; ++s) {
    if (!out.empty()) out += ' ';
    std::string sent = "The";
    const int n = nword(rng);
    for (int w = 0; w < n; ++w) {
      sent += ' ' + words[static_cast<std::size_t>(pick(rng))];
      if (punct(rng) == 0) sent += ',';
    }
    sent += ".!?"[rng() % 3];
    out += sent;
  }
  return sanitize(out);
}

void check_structure(const SpanNode& n, int k, std::size_t& leaves) {
  if (n.children.empty()) {
    ++leaves;
    EXPECT_GE(n.token_count(), 1u);
    return;
  }
  EXPECT_GE(n.children.size(), 2u);
  EXPECT_LE(n.children.size(), static_cast<std::size_t>(k));
  std::size_t at = n.token_begin;
  std::string cat;
  for (const auto& c : n.children) {
    EXPECT_EQ(c.token_begin, at);
    at = c.token_end;
    cat += c.text;
    check_structure(c, k, leaves);
  }
  EXPECT_EQ(at, n.token_end);
  EXPECT_EQ(cat, n.text);
}

TEST(ChooseMode, Thresholds) {
  EXPECT_EQ(choose_mode(500), ChunkMode::paragraph_cutpoint);
  EXPECT_EQ(choose_mode(4), ChunkMode::phrase_cutpoint);
  EXPECT_EQ(choose_mode(50), ChunkMode::main);
  EXPECT_EQ(choose_mode(200), ChunkMode::main);
  EXPECT_EQ(choose_mode(201), ChunkMode::paragraph_cutpoint);
  EXPECT_EQ(choose_mode(6), ChunkMode::main);
  EXPECT_EQ(choose_mode(5), ChunkMode::phrase_cutpoint);
}

TEST(SplitSentences, BoundaryRule) {
  const auto s = split_sentences("One. Two! three. 4 is next? Yes");
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(s[0], "One.");
  EXPECT_EQ(s[1], " Two! three.");
  EXPECT_EQ(s[2], " 4 is next?");
  EXPECT_EQ(s[3], " Yes");
  EXPECT_EQ(split_sentences("no boundary").size(), 1u);
}

TEST(ParseReply, MainMode) {
  const auto c = parse_chunk_reply(R"(["The quick brown fox", " jumps over", " the lazy dog."])", 3);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_TRUE(verify(c, "The quick brown fox jumps over the lazy dog."));
  EXPECT_EQ(parse_chunk_reply("```json\n[\"a\", \"b\"]\n```", 2).size(), 2u);
  EXPECT_EQ(parse_chunk_reply(R"(["a", "", "b"])", 2).size(), 2u);
  EXPECT_THROW(parse_chunk_reply("Sure, here you go", 2), ReplyParseError);
  EXPECT_THROW(parse_chunk_reply(R"({"a": 1})", 2), ReplyParseError);
  EXPECT_THROW(parse_chunk_reply(R"(["a", 1])", 2), ReplyParseError);
  EXPECT_THROW(parse_chunk_reply(R"(["a", "b", "c"])", 2), ReplyParseError);
  EXPECT_THROW(parse_chunk_reply("[]", 2), ReplyParseError);
}

TEST(ParseReply, CutPoints) {
  EXPECT_EQ(parse_cut_reply("[1, 3]", 5, 3), (std::vector<std::size_t>{1, 3}));
  EXPECT_TRUE(parse_cut_reply("[]", 5, 3).empty());
  EXPECT_THROW(parse_cut_reply("[3, 1]", 5, 3), ReplyParseError);
  EXPECT_THROW(parse_cut_reply("[0]", 5, 3), ReplyParseError);
  EXPECT_THROW(parse_cut_reply("[5]", 5, 3), ReplyParseError);
  EXPECT_THROW(parse_cut_reply("[1, 2, 3]", 5, 3), ReplyParseError);
  EXPECT_THROW(parse_cut_reply("[1.5]", 5, 3), ReplyParseError);
}

TEST(SegmentSpan, PhraseMode) {
  FunctionClient client([](const ChunkRequest& r) {
    EXPECT_EQ(r.mode, ChunkMode::phrase_cutpoint);
    EXPECT_EQ(r.tokens, (std::vector<std::string>{"The", " quick", " brown", " fox"}));
    EXPECT_NE(r.user_prompt.find(R"(" quick")"), std::string::npos);
    return ChunkResponse{"[3]", 0.0};
  });
  const auto chunks = segment_span("The quick brown fox", 2, ChunkMode::phrase_cutpoint, client, WordTokenizer());
  EXPECT_EQ(chunks, (std::vector<std::string>{"The quick brown", " fox"}));
}

TEST(SegmentSpan, ParagraphMode) {
  const std::string text = "A one. B two. C three. D four. E five.";
  FunctionClient client([](const ChunkRequest& r) {
    EXPECT_EQ(r.sentences.size(), 5u);
    EXPECT_NE(r.user_prompt.find("[0] A one.\n[1] B two."), std::string::npos);
    EXPECT_NE(r.system_prompt.find("*2*"), std::string::npos);
    return ChunkResponse{"[1, 3]", 0.0};
  });
  const auto chunks = segment_span(text, 3, ChunkMode::paragraph_cutpoint, client, WordTokenizer());
  EXPECT_EQ(chunks, (std::vector<std::string>{"A one.", " B two. C three.", " D four. E five."}));
}

TEST(SegmentSpan, MainModePrompt) {
  FunctionClient client([](const ChunkRequest& r) {
    EXPECT_NE(r.system_prompt.find("up to *3*"), std::string::npos);
    EXPECT_NE(r.user_prompt.find("\"The quick brown fox jumps over the lazy dog.\""), std::string::npos);
    return ChunkResponse{R"(["The quick brown fox", " jumps over", " the lazy dog."])", 0.0};
  });
  const auto chunks =
      segment_span("The quick brown fox jumps over the lazy dog.", 3, ChunkMode::main, client, WordTokenizer());
  EXPECT_EQ(chunks.size(), 3u);
}

TEST(Verify, Examples) {
  EXPECT_TRUE(verify({"ab", " cd"}, "ab cd"));
  EXPECT_FALSE(verify({"ab", "cd"}, "ab cd"));
  EXPECT_FALSE(verify({"ab cd", "x"}, "ab cd"));
  EXPECT_TRUE(verify({}, ""));
  EXPECT_FALSE(verify({}, "a"));
}

TEST(Verify, SlicingOracle) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> ch('a', 'e');
  for (int trial = 0; trial < 10000; ++trial) {
    std::string s(1 + rng() % 30, ' ');
    for (auto& c : s) c = static_cast<char>(ch(rng));
    // Slice at random cut points, then perturb half of the time.
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (pos < s.size()) {
      const std::size_t len = 1 + rng() % (s.size() - pos);
      parts.push_back(s.substr(pos, len));
      pos += len;
    }
    bool sliced = true;
    if (rng() % 2) {
      auto& p = parts[rng() % parts.size()];
      switch (rng() % 3) {
        case 0: p.erase(p.begin() + static_cast<std::ptrdiff_t>(rng() % p.size())); break;
        case 1: p.insert(p.begin() + static_cast<std::ptrdiff_t>(rng() % (p.size() + 1)), 'z'); break;
        default: p[rng() % p.size()] = 'z'; break;
      }
      sliced = false;
    }
    ASSERT_EQ(verify(parts, s), sliced) << s;
  }
}

TEST(BuildTree, SingleToken) {
  MockBisectClient client;
  const auto r = build_semantic_tree("Hello", 2, client, fast_policy());
  EXPECT_TRUE(r.complete);
  EXPECT_EQ(r.tree.root.status, SpanStatus::token_leaf);
  EXPECT_TRUE(r.exchanges.empty());
  EXPECT_EQ(to_model_sizes(r.tree).nodes().size(), 1u);
}

TEST(BuildTree, BisectionIsBalanced) {
  const std::string text = "a b c d e f g h i j k l m n o p";
  MockBisectClient client;
  const auto r = build_semantic_tree(text, 2, client, fast_policy());
  ASSERT_TRUE(r.complete);
  validate(r.tree);
  // Balanced binary slicing oracle: halve every range at its midpoint.
  auto check = [&](auto&& self, const SpanNode& n) -> void {
    if (n.token_count() == 1) {
      EXPECT_EQ(n.status, SpanStatus::token_leaf);
      return;
    }
    ASSERT_EQ(n.children.size(), 2u);
    EXPECT_EQ(n.children[0].token_end, n.token_begin + n.token_count() / 2);
    for (const auto& c : n.children) self(self, c);
  };
  check(check, r.tree.root);
  EXPECT_EQ(leaf_text(r.tree), text);
}

TEST(BuildTree, SixTokenBisectionLikelihood) {
  MockBisectClient client;
  const auto r = build_semantic_tree("a b c d e f", 2, client, fast_policy());
  ASSERT_TRUE(r.complete);
  // 6 -> 3+3, each 3 -> 1+2, each 2 -> 1+1; Z_2(n) = n + 1.
  const double hand = -std::log(7.0) - 2.0 * std::log(4.0) - 2.0 * std::log(3.0);
  EXPECT_NEAR(tree_log_prob(to_model_sizes(r.tree), 2).value, hand, 1e-12);
}

TEST(BuildTree, TinyStoryLeaves) {
  const auto text = sanitize(kTinyStory);
  MockBisectClient client;
  const auto r = build_semantic_tree(text, 2, client, fast_policy(4), nullptr, "tiny-198810");
  ASSERT_TRUE(r.complete);
  validate(r.tree);
  std::size_t leaves = 0;
  check_structure(r.tree.root, 2, leaves);
  EXPECT_EQ(leaves, 134u);
  EXPECT_EQ(r.tree.token_count(), 134u);
}

TEST(BuildTree, RedditStoryRoot) {
  const auto text = sanitize(kRedditStory);
  MockRandomClient client(5);
  const auto r = build_semantic_tree(text, 4, client, fast_policy(4), nullptr, "reddit-32721");
  ASSERT_TRUE(r.complete);
  const auto sizes = to_model_sizes(r.tree);
  EXPECT_EQ(sizes.nodes().front().size, 234u);
  EXPECT_EQ(r.tree.root.mode_used, ChunkMode::paragraph_cutpoint);
}

TEST(BuildTree, RandomCorpusInvariants) {
  std::mt19937_64 rng(2026);
  std::size_t paragraph_roots = 0;
  for (int d = 0; d < 1000; ++d) {
    const auto text = random_doc(rng);
    ASSERT_EQ(sanitize(text), text);
    const int k = 2 + d % 4;
    MockRandomClient client(static_cast<std::uint64_t>(d));
    const auto r = build_semantic_tree(text, k, client, fast_policy(), nullptr, "doc" + std::to_string(d));
    ASSERT_TRUE(r.complete) << r.error;
    ASSERT_NO_THROW(validate(r.tree));
    EXPECT_EQ(leaf_text(r.tree), text);
    std::size_t leaves = 0;
    check_structure(r.tree.root, k, leaves);
    if (r.tree.root.mode_used == ChunkMode::paragraph_cutpoint) ++paragraph_roots;
    const auto sizes = to_model_sizes(r.tree);
    EXPECT_EQ(sizes.nodes().front().size, tokenize(text).size());
    EXPECT_LE(tree_log_prob(sizes, k).value, 0.0);
    if (d % 50 == 0) {
      // Concurrency must not change the result.
      MockRandomClient again(static_cast<std::uint64_t>(d));
      const auto r2 = build_semantic_tree(text, k, again, fast_policy(4), nullptr, "doc" + std::to_string(d));
      EXPECT_EQ(dump_tree(r.tree), dump_tree(r2.tree));
      EXPECT_EQ(dump_tree(semantic_tree_from_json(to_json(r.tree))), dump_tree(r.tree));
    }
  }
  EXPECT_GT(paragraph_roots, 0u);
}

TEST(BuildTree, FaultyRepliesStillCover) {
  std::mt19937_64 rng(99);
  MockRandomOptions opts;
  opts.p_malformed = 0.1;
  opts.p_corrupt = 0.1;
  opts.p_misaligned = 0.1;
  std::size_t failures = 0;
  for (int d = 0; d < 100; ++d) {
    const auto text = random_doc(rng);
    MockRandomClient client(static_cast<std::uint64_t>(d), opts);
    const auto r = build_semantic_tree(text, 3, client, fast_policy(2));
    ASSERT_TRUE(r.complete);
    validate(r.tree);
    EXPECT_EQ(leaf_text(r.tree), text);
    failures += r.verification_failures;
  }
  EXPECT_GT(failures, 0u);
}

TEST(BuildTree, RetriesThenAccepts) {
  std::atomic<int> calls{0};
  FunctionClient client([&](const ChunkRequest& r) {
    ++calls;
    if (r.attempt < 2) return ChunkResponse{R"(["a b", "c"])", 0.0};  // drops a space
    const auto half = r.tokens.size() / 2;
    std::string a, b;
    for (std::size_t i = 0; i < r.tokens.size(); ++i) (i < half ? a : b) += r.tokens[i];
    return ChunkResponse{nlohmann::json::array({a, b}).dump(), 0.0};
  });
  const auto r = build_semantic_tree("a b c d e f", 2, client, fast_policy());
  ASSERT_TRUE(r.complete);
  EXPECT_EQ(r.tree.root.status, SpanStatus::internal);
  EXPECT_EQ(r.exchanges.front().outcome, "verify-failed");
  EXPECT_GE(r.verification_failures, 2u);
}

TEST(BuildTree, ExhaustedRetriesGiveAtomicLeaf) {
  FunctionClient client([](const ChunkRequest&) { return ChunkResponse{"not json", 0.0}; });
  auto policy = fast_policy();
  policy.max_retries = 3;
  const auto r = build_semantic_tree("a b c d e f g", 2, client, policy);
  ASSERT_TRUE(r.complete);
  EXPECT_EQ(r.tree.root.status, SpanStatus::atomic_leaf);
  EXPECT_EQ(r.exchanges.size(), 4u);
  EXPECT_EQ(r.atomic_leaves, 1u);
  EXPECT_EQ(to_model_sizes(r.tree).nodes().front().status, NodeStatus::absorbed);
}

TEST(BuildTree, SingleChunkReplyIsAtomic) {
  FunctionClient client([](const ChunkRequest& r) { return ChunkResponse{nlohmann::json::array({r.span}).dump(), 0.0}; });
  const auto r = build_semantic_tree("a b c d e f g", 3, client, fast_policy());
  EXPECT_EQ(r.tree.root.status, SpanStatus::atomic_leaf);
  EXPECT_EQ(r.exchanges.back().outcome, "single-chunk");
}

TEST(BuildTree, TransportRetries) {
  std::atomic<int> calls{0};
  MockBisectClient inner;
  FunctionClient client([&](const ChunkRequest& r) {
    if (r.transport_attempt < 2) {
      ++calls;
      throw TransportError("connection reset");
    }
    return inner.complete(r);
  });
  const auto r = build_semantic_tree("a b c d", 2, client, fast_policy());
  ASSERT_TRUE(r.complete);
  EXPECT_EQ(r.exchanges.front().outcome.rfind("transport-error", 0), 0u);
  EXPECT_GT(calls.load(), 0);

  FunctionClient down([](const ChunkRequest&) -> ChunkResponse { throw TransportError("unreachable"); });
  auto policy = fast_policy();
  policy.transport_retries = 2;
  const auto failed = build_semantic_tree("a b c d", 2, down, policy);
  EXPECT_FALSE(failed.complete);
  EXPECT_EQ(failed.exchanges.size(), 3u);
  EXPECT_EQ(failed.tree.root.status, SpanStatus::unexpanded);
}

TEST(BuildTree, ConfigErrorAbortsWithPartialTree) {
  std::atomic<int> calls{0};
  MockBisectClient inner;
  FunctionClient client([&](const ChunkRequest& r) {
    if (++calls > 3) throw ClientConfigError("401 unauthorized");
    return inner.complete(r);
  });
  const auto r = build_semantic_tree("a b c d e f g h i j k l m n o p", 2, client, fast_policy());
  EXPECT_FALSE(r.complete);
  EXPECT_NE(r.error.find("401"), std::string::npos);
  EXPECT_EQ(r.tree.root.status, SpanStatus::internal);
  const auto sizes = to_model_sizes(r.tree);
  EXPECT_TRUE(sizes.is_truncated());
  EXPECT_EQ(leaf_text(r.tree), r.tree.root.text);
}

TEST(BuildTree, RejectsBadArguments) {
  MockBisectClient client;
  EXPECT_THROW(build_semantic_tree("", 2, client), std::invalid_argument);
  EXPECT_THROW(build_semantic_tree("a", 1, client), std::invalid_argument);
}

TEST(Exchange, Json) {
  Exchange e{0, 4, ChunkMode::main, 1, 0, "prompt", "[\"a\"]", "single-chunk", 1.5};
  const auto j = to_json(e);
  EXPECT_EQ(j["mode"], "main");
  EXPECT_EQ(j["token_range"][1], 4);
  EXPECT_EQ(j["outcome"], "single-chunk");
}

}  // namespace
}  // namespace semtree
