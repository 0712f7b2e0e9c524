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

// OpenAI-compatible HTTP clients: chat completions for chunking and
// echo-mode completions for per-token log-probabilities.
//
// Define SEMTREE_WITH_OPENSSL before including (the CMake target does this
// when OpenSSL is found) to enable https base URLs.

#pragma once

#ifdef SEMTREE_WITH_OPENSSL
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#endif

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "llm_client.hpp"

namespace semtree {

struct ClientConfig {
  std::string base_url = "http://127.0.0.1:8000/v1";
  std::string model = "gpt-4o-mini";
  double temperature = 0.0;
  int max_tokens = 4096;
  std::string api_key_env = "SEMTREE_API_KEY";
  double timeout_s = 120.0;
  std::string audit_log;  // JSONL file; empty disables logging
};

/// Append-only JSONL log shared by the clients; one line per exchange.
class AuditLog {
 public:
  explicit AuditLog(const std::string& path) {
    if (!path.empty()) {
      out_.open(path, std::ios::app);
      if (!out_) throw ClientConfigError("cannot open audit log " + path);
    }
  }
  void write(const nlohmann::json& record) {
    if (!out_.is_open()) return;
    std::lock_guard lock(mutex_);
    out_ << record.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
    out_.flush();
  }

 private:
  std::mutex mutex_;
  std::ofstream out_;
};

namespace detail {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing slash
};

inline ParsedUrl parse_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ClientConfigError("base URL needs a scheme: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ClientConfigError("unsupported URL scheme: " + scheme);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (scheme == "https") throw ClientConfigError("https requires a build with OpenSSL support");
#endif
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl p;
  p.origin = url.substr(0, path_start);
  p.prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!p.prefix.empty() && p.prefix.back() == '/') p.prefix.pop_back();
  return p;
}

inline std::string read_api_key(const std::string& env) {
  if (env.empty()) return {};
  const char* v = std::getenv(env.c_str());
  return v ? std::string(v) : std::string();
}

/// POSTs a JSON body; maps connection failures, 429 and 5xx to TransportError
/// and other non-2xx codes to ClientConfigError.
inline nlohmann::json post_json(const ClientConfig& cfg, const std::string& path, const nlohmann::json& body,
                                AuditLog* audit, double* latency_ms) {
  const auto url = parse_base_url(cfg.base_url);
  httplib::Client cli(url.origin);
  const auto secs = static_cast<time_t>(cfg.timeout_s);
  cli.set_connection_timeout(secs, 0);
  cli.set_read_timeout(secs, 0);
  cli.set_write_timeout(secs, 0);
  httplib::Headers headers;
  const std::string key = read_api_key(cfg.api_key_env);
  if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

  const std::string payload = body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  const auto t0 = std::chrono::steady_clock::now();
  auto res = cli.Post(url.prefix + path, headers, payload, "application/json");
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (latency_ms) *latency_ms = ms;

  nlohmann::json record{{"endpoint", url.prefix + path}, {"request", body}, {"latency_ms", ms}};
  if (!res) {
    record["error"] = httplib::to_string(res.error());
    if (audit) audit->write(record);
    throw TransportError("request to " + cfg.base_url + path + " failed: " + httplib::to_string(res.error()));
  }
  record["status"] = res->status;
  record["response"] = res->body;
  if (audit) audit->write(record);
  if (res->status == 429 || res->status >= 500)
    throw TransportError("server returned HTTP " + std::to_string(res->status));
  if (res->status < 200 || res->status >= 300)
    throw ClientConfigError("server returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 300));
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("unparseable response body: ") + e.what());
  }
}

}  // namespace detail

/// Chat-completions client: system + user message, returns the assistant text.
class ChatCompletionClient final : public LlmClient {
 public:
  explicit ChatCompletionClient(ClientConfig cfg)
      : cfg_(std::move(cfg)), audit_(std::make_shared<AuditLog>(cfg_.audit_log)) {
    detail::parse_base_url(cfg_.base_url);
  }

  ChunkResponse complete(const ChunkRequest& r) override {
    nlohmann::json body{{"model", cfg_.model},
                        {"temperature", cfg_.temperature},
                        {"max_tokens", cfg_.max_tokens},
                        {"messages",
                         {{{"role", "system"}, {"content", r.system_prompt}},
                          {{"role", "user"}, {"content", r.user_prompt}}}}};
    double ms = 0.0;
    const auto reply = detail::post_json(cfg_, "/chat/completions", body, audit_.get(), &ms);
    try {
      return {reply.at("choices").at(0).at("message").at("content").get<std::string>(), ms};
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("unexpected chat response shape: ") + e.what());
    }
  }

  std::string model_id() const override { return cfg_.model; }
  const ClientConfig& config() const noexcept { return cfg_; }

 private:
  ClientConfig cfg_;
  std::shared_ptr<AuditLog> audit_;
};

struct TokenLogprobs {
  std::vector<std::string> tokens;
  std::vector<double> logprobs;  // nats; NaN for an unconditioned first token
};

/// Scores a text with an echo-mode completions request (max_tokens = 0).
class LogprobClient {
 public:
  explicit LogprobClient(ClientConfig cfg)
      : cfg_(std::move(cfg)), audit_(std::make_shared<AuditLog>(cfg_.audit_log)) {
    detail::parse_base_url(cfg_.base_url);
  }

  TokenLogprobs fetch(const std::string& text) const {
    nlohmann::json body{{"model", cfg_.model}, {"prompt", text},   {"max_tokens", 0},
                        {"echo", true},        {"logprobs", 1},    {"temperature", cfg_.temperature}};
    const auto reply = detail::post_json(cfg_, "/completions", body, audit_.get(), nullptr);
    TokenLogprobs out;
    try {
      const auto& lp = reply.at("choices").at(0).at("logprobs");
      for (const auto& t : lp.at("tokens")) out.tokens.push_back(t.get<std::string>());
      for (const auto& v : lp.at("token_logprobs"))
        out.logprobs.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("unexpected logprob response shape: ") + e.what());
    }
    if (out.tokens.size() != out.logprobs.size()) throw TransportError("token and logprob arrays differ in length");
    return out;
  }

  const ClientConfig& config() const noexcept { return cfg_; }

 private:
  ClientConfig cfg_;
  std::shared_ptr<AuditLog> audit_;
};

}  // namespace semtree
