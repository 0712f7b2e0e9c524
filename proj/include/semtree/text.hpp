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

// Text sanitation and tokenization for the chunker.

#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace semtree {

namespace detail {

inline bool is_ascii_upper_or_digit(char c) { return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'); }

inline std::string strip_outer_fence(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\n' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\n' || s[e - 1] == '\r')) --e;
  const std::string_view t = s.substr(b, e - b);
  if (t.size() < 6 || t.substr(0, 3) != "```" || t.substr(t.size() - 3) != "```") return std::string(s);
  const auto nl = t.find('\n');
  if (nl == std::string_view::npos || nl + 1 > t.size() - 3) return std::string(s);
  return std::string(t.substr(nl + 1, t.size() - 3 - (nl + 1)));
}

inline std::string normalize_line_endings(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\r') {
      out.push_back('\n');
      if (i + 1 < s.size() && s[i + 1] == '\n') ++i;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

inline std::string sentence_spacing(std::string_view s) {
  std::string out;
  out.reserve(s.size() + s.size() / 16);
  for (std::size_t i = 0; i < s.size(); ++i) {
    out.push_back(s[i]);
    if ((s[i] == '.' || s[i] == '!' || s[i] == '?') && i + 1 < s.size() && is_ascii_upper_or_digit(s[i + 1]))
      out.push_back(' ');
  }
  return out;
}

inline std::string collapse_and_trim(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == ' ' && (out.empty() || out.back() == ' ')) continue;
    out.push_back(c);
  }
  if (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

/// Drops C0 controls, DEL and the UTF-8 encoded C1 range U+0080..U+009F.
inline std::string remove_controls(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (c < 0x20 || c == 0x7f) continue;
    if (c == 0xc2 && i + 1 < s.size()) {
      const auto d = static_cast<unsigned char>(s[i + 1]);
      if (d >= 0x80 && d <= 0x9f) {
        ++i;
        continue;
      }
    }
    out.push_back(s[i]);
  }
  return out;
}

inline constexpr std::array<std::string_view, 16> kQuoteMarks = {
    "\"",            "'",
    "‘",        "’",  // single curly
    "‚",        "‛",
    "“",        "”",  // double curly
    "„",        "‟",
    "«",        "»",  // guillemets
    "‹",        "›",
    "＂",        "＇",  // fullwidth
};

inline std::string delete_quotes(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    bool hit = false;
    for (auto q : kQuoteMarks) {
      if (s.substr(i, q.size()) == q) {
        i += q.size();
        hit = true;
        break;
      }
    }
    if (!hit) out.push_back(s[i++]);
  }
  return out;
}

}  // namespace detail

/// Normalizes raw text for chunking: outer code fence, line endings,
/// whitespace, sentence spacing, control characters and quotation marks.
/// Idempotent.
inline std::string sanitize(std::string_view text) {
  std::string s = detail::strip_outer_fence(text);
  s = detail::normalize_line_endings(s);
  for (char& c : s)
    if (c == '\t' || c == '\n') c = ' ';
  s = detail::sentence_spacing(s);
  s = detail::collapse_and_trim(s);
  s = detail::remove_controls(s);
  s = detail::delete_quotes(s);
  // Deleting quotes or controls can expose new sentence starts and double spaces.
  s = detail::sentence_spacing(s);
  return detail::collapse_and_trim(s);
}

// ---------------------------------------------------------------------------
// Tokenizers

struct TokenSpan {
  std::size_t begin = 0;  // byte offsets into the text
  std::size_t end = 0;
};

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::string id() const = 0;
  /// Lossless segmentation: spans tile [0, text.size()).
  virtual std::vector<TokenSpan> spans(std::string_view text) const = 0;

  std::vector<std::string> tokenize(std::string_view text) const {
    std::vector<std::string> out;
    for (const auto& sp : spans(text)) out.emplace_back(text.substr(sp.begin, sp.end - sp.begin));
    return out;
  }
  std::size_t count(std::string_view text) const { return spans(text).size(); }
};

/// "ws-word-v1": an optional single leading space followed by a run of word
/// bytes (ASCII alphanumerics and any byte >= 0x80), or followed by one
/// punctuation byte. A space not followed by a visible byte is its own token.
class WordTokenizer final : public Tokenizer {
 public:
  static constexpr std::string_view kId = "ws-word-v1";
  std::string id() const override { return std::string(kId); }

  std::vector<TokenSpan> spans(std::string_view t) const override {
    std::vector<TokenSpan> out;
    std::size_t i = 0;
    const std::size_t n = t.size();
    while (i < n) {
      const std::size_t start = i;
      if (t[i] == ' ') {
        ++i;
        if (i >= n || t[i] == ' ') {
          out.push_back({start, i});
          continue;
        }
      }
      if (is_word(t[i])) {
        while (i < n && is_word(t[i])) ++i;
      } else {
        ++i;
      }
      out.push_back({start, i});
    }
    return out;
  }

 private:
  static bool is_word(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u >= 0x80 || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
  }
};

/// "utf8-char-v1": one token per UTF-8 code point.
class CharTokenizer final : public Tokenizer {
 public:
  static constexpr std::string_view kId = "utf8-char-v1";
  std::string id() const override { return std::string(kId); }

  std::vector<TokenSpan> spans(std::string_view t) const override {
    std::vector<TokenSpan> out;
    std::size_t i = 0;
    while (i < t.size()) {
      const std::size_t start = i++;
      while (i < t.size() && (static_cast<unsigned char>(t[i]) & 0xc0) == 0x80) ++i;
      out.push_back({start, i});
    }
    return out;
  }
};

inline constexpr std::string_view kDefaultTokenizerId = WordTokenizer::kId;

class UnknownTokenizer : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Process-wide tokenizer registry keyed by tokenizer_id.
class TokenizerRegistry {
 public:
  using Factory = std::function<std::shared_ptr<const Tokenizer>()>;

  static TokenizerRegistry& instance() {
    static TokenizerRegistry r;
    return r;
  }

  void add(const std::string& id, Factory f) {
    std::lock_guard lock(mutex_);
    factories_[id] = std::move(f);
  }

  std::shared_ptr<const Tokenizer> make(const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = factories_.find(id);
    if (it == factories_.end()) throw UnknownTokenizer("unknown tokenizer_id: " + id);
    return it->second();
  }

  std::vector<std::string> ids() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, f] : factories_) out.push_back(id);
    return out;
  }

 private:
  TokenizerRegistry() {
    factories_[std::string(WordTokenizer::kId)] = [] { return std::make_shared<WordTokenizer>(); };
    factories_[std::string(CharTokenizer::kId)] = [] { return std::make_shared<CharTokenizer>(); };
  }
  mutable std::mutex mutex_;
  std::map<std::string, Factory> factories_;
};

inline std::shared_ptr<const Tokenizer> make_tokenizer(const std::string& id = std::string(kDefaultTokenizerId)) {
  return TokenizerRegistry::instance().make(id);
}

/// Tokenizes with the default tokenizer.
inline std::vector<std::string> tokenize(std::string_view text) { return WordTokenizer().tokenize(text); }

}  // namespace semtree
