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

// Chunking prompt templates. Byte-identical copies live in prompts/*.txt.

#pragma once

#include <string>
#include <string_view>

namespace semtree::prompts {

// prompts/segmentation_system.txt
inline constexpr std::string_view kSegmentationSystem = R"tpl(You are a text-segmentation assistant.
Split the entire input into up to *{K}* contiguous, non-overlapping segments such that concatenating them in order reproduces the original text exactly. Including ALL whitespaces and punctuation.
Each segment should be semantically coherent.
In the case of simple phrases, segment into semantically contiguous chunks of tokens.
*CRITICAL*: Preserve ALL whitespace and quotation marks exactly as it appears in the input. If the input starts with a space, the first segment should start with that space.
Return a raw JSON array of strings - do NOT wrap in markdown or code fences.

Examples

Input:
"The quick brown fox jumps over the lazy dog."
Output:
["The quick brown fox", " jumps over", " the lazy dog."]

Input:
" brown fox"
Output:
[" brown", " fox"]

Input:
"the lazy dog."
Output:
["the", " lazy dog", "."]

Input:
" jumps over"
Output:
[" jumps", " over"]
)tpl";

// prompts/segmentation_user.txt
inline constexpr std::string_view kSegmentationUser = R"tpl(Input text to segment:

{text}
)tpl";

// prompts/cut_points_system.txt
inline constexpr std::string_view kCutPointsSystem = R"tpl(You are a text-segmentation assistant **in CUT-POINT mode**.
The input will be N numbered sentences (0 ... N-1).
Choose up to *{K-1}* cut points so that the resulting segments
are semantically contiguous and most conceptually disjoint from the other segments.
Return **raw JSON** -- a strictly ascending list of integers in the
range 1 ... N-1. Do NOT wrap in markdown.

Example

Input:
[0] Yeah I was in the boy scouts at the time.
[1] And we was doing the 50-yard dash racing but we was at the pier marked off and so we was doing the 50-yard dash.
[2] There was about 8 or 9 of us you know, going down, coming back.
[3] And going down the third time I caught cramps and I started yelling 'Help!' but the fellows didn't believe me you know.
[4] They thought I was just trying to catch up because I was going on or slowing down.
Output:
[1, 3]
)tpl";

// prompts/cut_points_user.txt
inline constexpr std::string_view kCutPointsUser = R"tpl(Input numbered sentences:

{sentences}
)tpl";

// prompts/phrase_cut_points_system.txt
inline constexpr std::string_view kPhraseCutPointsSystem = R"tpl(You are a **phrase-level segmentation assistant**.
Given a token list with indices, return a JSON array of cut-points (0-based) where a new segment starts.
Choose no more than *{K-1}*, yielding up to *{K}* segments in total.
Segments should be the largest contiguous group of tokens that form a coherent phrase (e.g. determiner + noun, adjective + noun, verb + particle).
Attach sentence-final punctuation to the preceding word.
Cut-points must be strictly increasing and between 1 and len(tokens)-1.
**JSON only** -- respond with the RAW JSON array (e.g. [3]) and nothing else.

Example

Input:
{"tokens": ["The", " quick", " brown", " fox"]}
Output:
[3]

Implied Segments (for illustration):
["The quick brown", " fox"]
)tpl";

// prompts/phrase_cut_points_user.txt
inline constexpr std::string_view kPhraseCutPointsUser = R"tpl(Input token list:

{tokens}
)tpl";

/// Replaces every "{K}" and "{K-1}" slot.
inline std::string fill_k(std::string_view tpl, int k) {
  std::string out;
  out.reserve(tpl.size());
  std::size_t i = 0;
  while (i < tpl.size()) {
    if (tpl.substr(i, 3) == "{K}") {
      out += std::to_string(k);
      i += 3;
    } else if (tpl.substr(i, 5) == "{K-1}") {
      out += std::to_string(k - 1);
      i += 5;
    } else {
      out.push_back(tpl[i++]);
    }
  }
  return out;
}

/// Replaces the first occurrence of `slot` (e.g. "{text}") with `value`.
inline std::string fill_slot(std::string_view tpl, std::string_view slot, std::string_view value) {
  std::string out(tpl);
  const auto pos = out.find(slot);
  if (pos != std::string::npos) out.replace(pos, slot.size(), value);
  return out;
}

}  // namespace semtree::prompts
