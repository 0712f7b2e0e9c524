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

// Plumbing for the command-line tool: range syntax, corpus and tree loading,
// and artifact directories with a resolved config and a file manifest.

#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <semtree/llm_client.hpp>
#include <semtree/model_tree.hpp>
#include <semtree/semantic_tree.hpp>

namespace semtree::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kInputError = 2, kNetworkError = 3 };

/// Bad or missing input data (maps to exit code 2).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::uint64_t parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) throw std::invalid_argument("not a non-negative integer: " + std::string(s));
  return v;
}

/// "a..b" (doubling when geometric, else step 1), "a..b:step" (additive step),
/// "a,b,c" or a single value. Output is sorted and unique.
inline std::vector<std::uint64_t> parse_range(std::string_view spec, bool geometric) {
  std::vector<std::uint64_t> out;
  if (const auto dots = spec.find(".."); dots != std::string_view::npos) {
    std::string_view hi_part = spec.substr(dots + 2);
    std::optional<std::uint64_t> step;
    if (const auto colon = hi_part.find(':'); colon != std::string_view::npos) {
      step = parse_u64(hi_part.substr(colon + 1));
      hi_part = hi_part.substr(0, colon);
      if (*step == 0) throw std::invalid_argument("range step must be positive");
    }
    const auto lo = parse_u64(spec.substr(0, dots)), hi = parse_u64(hi_part);
    if (hi < lo) throw std::invalid_argument("empty range: " + std::string(spec));
    if (geometric && !step) {
      if (lo == 0) throw std::invalid_argument("geometric range cannot start at 0");
      for (std::uint64_t v = lo; v <= hi; v *= 2) out.push_back(v);
    } else {
      const std::uint64_t st = step.value_or(1);
      for (std::uint64_t v = lo; v <= hi; v += st) out.push_back(v);
    }
  } else {
    std::size_t pos = 0;
    while (pos <= spec.size()) {
      const auto comma = spec.find(',', pos);
      const auto part = spec.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
      if (!part.empty()) out.push_back(parse_u64(part));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
  }
  if (out.empty()) throw std::invalid_argument("empty range: " + std::string(spec));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline std::vector<int> parse_int_range(std::string_view spec) {
  std::vector<int> out;
  for (auto v : parse_range(spec, false)) out.push_back(static_cast<int>(v));
  return out;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CorpusDoc {
  std::string source_id;
  std::string text;
};

/// A directory of *.txt files (sorted by name, id = file stem), a JSONL file
/// of {"source_id", "text"} records, or one text file.
inline std::vector<CorpusDoc> load_corpus(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  std::vector<CorpusDoc> docs;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path))
      if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) docs.push_back({f.stem().string(), read_file(f)});
  } else if (path.extension() == ".jsonl") {
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t i = 0;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        docs.push_back({j.value("source_id", "doc" + std::to_string(i)), j.at("text").get<std::string>()});
      } catch (const nlohmann::json::exception& e) {
        throw InputError(path.string() + ": bad record " + std::to_string(i + 1) + ": " + e.what());
      }
      ++i;
    }
  } else if (fs::is_regular_file(path)) {
    docs.push_back({path.stem().string(), read_file(path)});
  } else {
    throw InputError("corpus not found: " + path.string());
  }
  if (docs.empty()) throw InputError("corpus is empty: " + path.string());
  return docs;
}

struct LoadedTree {
  std::string source_id;
  ModelTree sizes;
  std::optional<SemanticTree> semantic;
};

inline LoadedTree tree_from_json(const nlohmann::json& j) {
  const std::string fmt = j.value("format", std::string());
  if (fmt == "semtree.semantic-tree/1") {
    auto t = semantic_tree_from_json(j);
    LoadedTree out{t.source_id, to_model_sizes(t), std::nullopt};
    out.semantic = std::move(t);
    return out;
  }
  if (fmt == "semtree.model-tree/1") return {j.value("source_id", std::string()), model_tree_from_json(j), std::nullopt};
  throw InputError("unrecognized tree format '" + fmt + "'");
}

/// A directory of *.json tree files (sorted) or a JSONL file of trees.
inline std::vector<LoadedTree> load_trees(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  std::vector<LoadedTree> out;
  auto parse = [&](const std::string& text, const std::string& where) {
    try {
      out.push_back(tree_from_json(nlohmann::json::parse(text)));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(where + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw InputError(where + ": " + e.what());
    }
  };
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path))
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) parse(read_file(f), f.string());
  } else if (fs::is_regular_file(path)) {
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.find_first_not_of(" \t\r") != std::string::npos) parse(line, path.string() + ":" + std::to_string(n));
    }
  } else {
    throw InputError("trees not found: " + path.string());
  }
  if (out.empty()) throw InputError("no trees in " + path.string());
  return out;
}

/// Resolved option values of an app and its selected subcommands.
inline nlohmann::json resolved_options(const CLI::App& app) {
  nlohmann::json j = nlohmann::json::object();
  for (const CLI::Option* opt : app.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    if (opt->get_expected_max() == 0) {
      j[name] = opt->count() > 0;
      continue;
    }
    const auto values = opt->count() > 0 ? opt->reduced_results() : std::vector<std::string>{};
    if (values.empty()) {
      const auto d = opt->get_default_str();
      j[name] = d.empty() ? nlohmann::json(nullptr) : nlohmann::json(d);
    } else if (values.size() == 1 && opt->get_expected_max() <= 1) {
      j[name] = values.front();
    } else {
      j[name] = values;
    }
  }
  for (const CLI::App* sub : app.get_subcommands()) j[sub->get_name()] = resolved_options(*sub);
  return j;
}

inline std::string fnv1a_hex(std::string_view data) {
  std::ostringstream ss;
  ss << std::hex;
  ss.width(16);
  ss.fill('0');
  ss << semtree::detail::fnv1a(data);
  return ss.str();
}

/// Output directory that records every file written through it.
class RunDir {
 public:
  explicit RunDir(std::filesystem::path root) : root_(std::move(root)) {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec) throw InputError("cannot create output directory " + root_.string() + ": " + ec.message());
  }

  const std::filesystem::path& root() const noexcept { return root_; }

  std::filesystem::path write(const std::string& rel, const std::string& content) {
    const auto p = root_ / rel;
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw InputError("cannot write " + p.string());
    out << content;
    files_[rel] = {content.size(), fnv1a_hex(content)};
    return p;
  }

  void write_config(const nlohmann::json& config) { write("config.json", config.dump(2) + "\n"); }

  /// Writes manifest.json listing every file (itself excluded), sorted by path.
  void finish(const std::string& command) {
    nlohmann::json files = nlohmann::json::array();
    for (const auto& [path, info] : files_)
      files.push_back({{"path", path}, {"bytes", info.first}, {"fnv1a64", info.second}});
    const nlohmann::json manifest{{"command", command}, {"files", files}};
    const std::string text = manifest.dump(2) + "\n";
    std::ofstream out(root_ / "manifest.json", std::ios::binary);
    if (!out) throw InputError("cannot write manifest");
    out << text;
  }

 private:
  std::filesystem::path root_;
  std::map<std::string, std::pair<std::size_t, std::string>> files_;
};

}  // namespace semtree::cli
