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

// Builds a semantic tree for a short text with the offline bisection client
// and prints it together with its likelihood rate under the ensemble.

#include <cstdio>
#include <iostream>
#include <string>

#include <semtree/semtree.hpp>

int main(int argc, char** argv) {
  using namespace semtree;
  const int k = argc > 1 ? std::stoi(argv[1]) : 2;
  const std::string raw =
      "Once upon a time there was a small robot. It lived in a quiet town and liked to help people. "
      "One day it found a lost kitten near the river. The robot carried the kitten home, and everyone smiled.";
  const auto text = sanitize(raw);

  MockBisectClient client;
  const auto result = build_semantic_tree(text, k, client, {});
  std::cout << dump_tree(result.tree);
  std::printf("tokens: %zu, -log P / N = %.4f nats/token (K=%d)\n", result.tree.root.token_count(),
              tree_rate(result.tree, k), k);
}
