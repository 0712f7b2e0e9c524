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

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <semtree/http_client.hpp>
#include <semtree/semtree.hpp>

#include "run_support.hpp"

namespace {

using namespace semtree;
using namespace semtree::cli;
using nlohmann::json;

struct Global {
  std::string out = "semtree-out";
  std::uint64_t seed = 1;
  unsigned jobs = 1;
};

struct ClientOpts {
  std::string mock;  // "", "bisect" or "random"
  std::uint64_t mock_seed = 0;
  ClientConfig cfg;
  unsigned max_in_flight = 4;
  int max_retries = 3;
  int transport_retries = 4;
  double backoff_ms = 500.0;
  std::string tokenizer = std::string(kDefaultTokenizerId);
  std::string created_at;
  bool raw = false;
};

void add_client_options(CLI::App* sub, ClientOpts& c, bool chunking) {
  sub->add_option("--base-url", c.cfg.base_url, "OpenAI-compatible endpoint")->capture_default_str();
  sub->add_option("--model", c.cfg.model, "Model name")->capture_default_str();
  sub->add_option("--api-key-env", c.cfg.api_key_env, "Environment variable holding the API key")->capture_default_str();
  sub->add_option("--temperature", c.cfg.temperature)->capture_default_str();
  sub->add_option("--timeout", c.cfg.timeout_s, "Request timeout in seconds")->capture_default_str();
  if (!chunking) return;
  sub->add_option("--max-tokens", c.cfg.max_tokens)->capture_default_str();
  sub->add_option("--mock", c.mock, "Offline client instead of HTTP")->check(CLI::IsMember({"", "bisect", "random"}));
  sub->add_option("--mock-seed", c.mock_seed)->capture_default_str();
  sub->add_option("--max-in-flight", c.max_in_flight, "Concurrent requests per level")->capture_default_str();
  sub->add_option("--max-retries", c.max_retries, "Re-prompts after a failed verification")->capture_default_str();
  sub->add_option("--transport-retries", c.transport_retries)->capture_default_str();
  sub->add_option("--backoff-ms", c.backoff_ms)->capture_default_str();
  sub->add_option("--tokenizer", c.tokenizer)->capture_default_str();
  sub->add_option("--created-at", c.created_at, "Timestamp recorded in trees (empty for reproducible output)");
  sub->add_flag("--raw", c.raw, "Skip text sanitization");
}

std::string fmt(double v, int prec = 10) {
  std::ostringstream ss;
  ss << std::setprecision(prec) << v;
  return ss.str();
}

// --- entropy ---------------------------------------------------------------

struct EntropyOpts {
  int k = 4;
  std::string ladder = "512..8192";
  std::string methods = "recursion,levelsum";
  std::uint64_t levelsum_max = 8192;
};

int run_entropy(const EntropyOpts& o, RunDir& dir) {
  const auto ns = parse_range(o.ladder, true);
  const bool want_enum = o.methods.find("enumeration") != std::string::npos;
  const bool want_level = o.methods.find("levelsum") != std::string::npos;
  const bool want_rec = o.methods.find("recursion") != std::string::npos || (!want_enum && !want_level);
  std::ostringstream csv;
  csv << "n,k,method,entropy_nats,entropy_per_token_nats\n" << std::setprecision(15);
  std::cout << "N        method        H(N) [nats]      H/N\n";
  for (auto n : ns) {
    auto emit = [&](const EnsembleEntropy& e) {
      csv << n << ',' << o.k << ',' << to_string(e.method) << ',' << e.h << ',' << e.h / static_cast<double>(n) << '\n';
      std::printf("%-8llu %-13s %-16.10g %.6f\n", static_cast<unsigned long long>(n), std::string(to_string(e.method)).c_str(),
                  e.h, e.h / static_cast<double>(n));
    };
    if (want_enum && n <= 8) emit(entropy_exact(n, o.k));
    if (want_level && n <= o.levelsum_max) emit(entropy_levelsum(n, o.k));
    if (want_rec) emit(entropy_recursive(n, o.k));
  }
  dir.write("entropy.csv", csv.str());

  std::ostringstream rates;
  rates << "k,method,h_nats_per_token,error,converged\n" << std::setprecision(12);
  std::vector<EntropyRate> rs;
  if (ns.size() >= 2) rs.push_back(entropy_rate(o.k, ns));
  rs.push_back(residue_rate(o.k));
  rs.push_back(large_k_rate(o.k));
  if (o.k == 2) rs.push_back(exact_k2_rate());
  std::cout << "\nrate estimates (nats/token)\n";
  for (const auto& r : rs) {
    rates << r.k << ',' << to_string(r.method) << ',' << r.h << ',' << r.error << ',' << (r.converged ? 1 : 0) << '\n';
    std::printf("  %-18s %.6f\n", std::string(to_string(r.method)).c_str(), r.h);
  }
  dir.write("rates.csv", rates.str());
  return kOk;
}

// --- enumerate -------------------------------------------------------------

struct EnumerateOpts {
  std::uint64_t n = 4;
  int k = 3;
  std::uint64_t dump_cap = 100000;
};

int run_enumerate(const EnumerateOpts& o, RunDir& dir) {
  const auto count = count_trees(o.n, o.k);
  const auto h = entropy_exact(o.n, o.k);
  json summary{{"n", o.n}, {"k", o.k}, {"tree_count", count.str()}, {"entropy_nats", h.h}};
  if (count <= o.dump_cap) {
    const auto trees = enumerate_trees(o.n, o.k, o.dump_cap);
    std::ostringstream lines;
    CompensatedSum total;
    for (const auto& t : trees) {
      lines << json{{"log_prob", t.log_prob.value}, {"tree", to_json(t.tree)}}.dump() << '\n';
      total.add(std::exp(t.log_prob.value));
    }
    summary["probability_total"] = total.value();
    dir.write("trees.jsonl", lines.str());
  } else {
    summary["note"] = "tree list not written: count exceeds dump cap";
  }
  dir.write("summary.json", summary.dump(2) + "\n");
  std::cout << count.str() << " trees, H = " << fmt(h.h) << " nats\n";
  return kOk;
}

// --- simulate --------------------------------------------------------------

struct SimulateOpts {
  int k = 4;
  std::uint64_t n = 1000;
  std::uint64_t n_max = 0;
  std::size_t samples = 100;
  bool save_trees = false;
};

int run_simulate(const SimulateOpts& o, const Global& g, RunDir& dir) {
  if (o.n < 1) throw std::invalid_argument("--n must be >= 1");
  const std::uint64_t hi = std::max(o.n, o.n_max);
  std::vector<std::uint64_t> sizes(o.samples);
  std::vector<double> rates(o.samples);
  std::vector<std::string> dumps(o.save_trees ? o.samples : 0);
  for (std::size_t i = 0; i < o.samples; ++i)
    sizes[i] = hi == o.n ? o.n : o.n + derive_seed(g.seed ^ 0x5bd1e995ull, i) % (hi - o.n + 1);
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < o.samples; i += stride) {
      const auto tree = sample_tree_seeded(sizes[i], o.k, derive_seed(g.seed, i));
      rates[i] = 0.0 - tree_log_prob(tree, o.k).value / static_cast<double>(sizes[i]);
      if (o.save_trees) {
        auto j = to_json(tree);
        j["source_id"] = "sim-" + std::to_string(i);
        dumps[i] = j.dump();
      }
    }
  };
  const unsigned jobs = std::max(1u, g.jobs);
  if (jobs == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(work, j, jobs);
  }
  std::ostringstream csv;
  csv << "index,n,k,rate_nats_per_token\n" << std::setprecision(15);
  for (std::size_t i = 0; i < o.samples; ++i) csv << i << ',' << sizes[i] << ',' << o.k << ',' << rates[i] << '\n';
  dir.write("aep.csv", csv.str());
  if (o.save_trees) {
    std::string all;
    for (const auto& d : dumps) all += d + "\n";
    dir.write("trees.jsonl", all);
  }
  const double mean = o.samples ? compensated_total(rates) / static_cast<double>(o.samples) : 0.0;
  double var = 0.0;
  for (double r : rates) var += (r - mean) * (r - mean);
  const double sd = o.samples > 1 ? std::sqrt(var / static_cast<double>(o.samples - 1)) : 0.0;
  json summary{{"k", o.k}, {"n_min", o.n}, {"n_max", hi}, {"samples", o.samples}, {"mean_rate_nats_per_token", mean},
               {"stddev_rate", sd}};
  dir.write("summary.json", summary.dump(2) + "\n");
  std::cout << o.samples << " trees (K=" << o.k << ", N=" << o.n << (hi > o.n ? ".." + std::to_string(hi) : "")
            << "): mean rate " << fmt(mean) << " nats/token, std " << fmt(sd) << '\n';
  return kOk;
}

// --- scaling ---------------------------------------------------------------

struct ScalingOpts {
  int k = 4;
  std::string levels = "2..12";
  std::size_t points = 4096;
  double s_min = 1e-12;
};

int run_scaling(const ScalingOpts& o, const Global& g, RunDir& dir) {
  GridSpec spec;
  spec.points = o.points;
  spec.s_min = o.s_min;
  std::ostringstream summary, collapse;
  summary << "k,level,mu,sigma,normalization,first_moment,first_moment_expected,ks_distance\n" << std::setprecision(12);
  collapse << "k,level,x,phi\n" << std::setprecision(12);
  std::cout << "L   normalization   <s>            K^-(L-1)       KS\n";
  for (int level : parse_int_range(o.levels)) {
    if (level < 2) continue;
    const auto curve = scaling_function(o.k, level, spec, g.jobs);
    const auto p = lognormal_params(o.k, level);
    const double ks = ks_distance_to_normal(curve, p);
    const double m1 = curve.moment(1.0), expect = std::pow(static_cast<double>(o.k), -(level - 1));
    summary << o.k << ',' << level << ',' << p.mu << ',' << p.sigma << ',' << curve.normalization() << ',' << m1 << ','
            << expect << ',' << ks << '\n';
    std::ostringstream c;
    write_curve_csv(c, curve);
    dir.write("curves/f_K" + std::to_string(o.k) + "_L" + std::to_string(level) + ".csv", c.str());
    const auto st = standardize(curve, p);
    for (std::size_t i = 0; i < st.x.size(); i += 8) collapse << o.k << ',' << level << ',' << st.x[i] << ',' << st.density[i] << '\n';
    std::printf("%-3d %-15.10f %-14.6e %-14.6e %.5f\n", level, curve.normalization(), m1, expect, ks);
  }
  dir.write("summary.csv", summary.str());
  dir.write("collapse.csv", collapse.str());
  return kOk;
}

// --- chunk -----------------------------------------------------------------

struct ChunkOpts {
  std::string corpus;
  int k = 4;
  ClientOpts client;
};

std::unique_ptr<LlmClient> make_client(const ClientOpts& c) {
  if (c.mock == "bisect") return std::make_unique<MockBisectClient>();
  if (c.mock == "random") return std::make_unique<MockRandomClient>(c.mock_seed);
  return std::make_unique<ChatCompletionClient>(c.cfg);
}

int run_chunk(ChunkOpts o, RunDir& dir) {
  const auto docs = load_corpus(o.corpus);
  if (o.client.mock.empty()) o.client.cfg.audit_log = (dir.root() / "audit.jsonl").string();
  auto client = make_client(o.client);
  const auto tok = make_tokenizer(o.client.tokenizer);
  ChunkPolicy policy;
  policy.max_retries = o.client.max_retries;
  policy.transport_retries = o.client.transport_retries;
  policy.backoff_ms = o.client.backoff_ms;
  policy.max_in_flight = o.client.max_in_flight;
  policy.created_at = o.client.created_at;

  std::ostringstream summary, exchanges;
  summary << "source_id,tokens,complete,verification_failures,atomic_leaves,tree_rate_nats_per_token\n"
          << std::setprecision(12);
  std::string first_error;
  for (const auto& d : docs) {
    const std::string text = o.client.raw ? d.text : sanitize(d.text);
    if (text.empty()) {
      std::cerr << "skipping empty document " << d.source_id << '\n';
      continue;
    }
    auto r = build_semantic_tree(text, o.k, *client, policy, tok, d.source_id);
    for (const auto& e : r.exchanges) {
      auto j = to_json(e);
      j["source_id"] = d.source_id;
      exchanges << j.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
    }
    dir.write("trees/" + d.source_id + ".json", dump_tree(r.tree));
    summary << d.source_id << ',' << r.tree.token_count() << ',' << (r.complete ? 1 : 0) << ',' << r.verification_failures
            << ',' << r.atomic_leaves << ',';
    if (r.complete)
      summary << tree_rate(r.tree, o.k);
    summary << '\n';
    if (!r.complete && first_error.empty()) first_error = d.source_id + ": " + r.error;
    std::cout << d.source_id << ": " << r.tree.token_count() << " tokens" << (r.complete ? "" : " (incomplete)") << '\n';
  }
  dir.write("summary.csv", summary.str());
  dir.write("exchanges.jsonl", exchanges.str());
  if (!first_error.empty()) {
    std::cerr << "error: chunking stopped early for " << first_error << '\n';
    return kNetworkError;
  }
  return kOk;
}

// --- fit -------------------------------------------------------------------

struct FitOpts {
  std::string trees;
  std::vector<std::string> trees_k;  // "K=path"
  std::string k_range = "2..8";
  std::string corpus_id = "corpus";
  KlOptions kl;
  std::string theory = "finite-n";
  std::size_t min_trees = 10;
  std::size_t bootstrap = 0;
};

std::vector<ModelTree> sizes_of(const std::vector<LoadedTree>& loaded) {
  std::vector<ModelTree> out;
  for (const auto& l : loaded) out.push_back(l.sizes);
  return out;
}

double mean_tree_rate(const std::vector<ModelTree>& trees, int k) {
  CompensatedSum s;
  std::size_t n = 0;
  for (const auto& t : trees) {
    if (t.is_truncated()) continue;
    s.add(tree_rate(t, k));
    ++n;
  }
  return n ? s.value() / static_cast<double>(n) : std::nan("");
}

int run_fit(FitOpts o, const Global& g, RunDir& dir) {
  o.kl.theory = theory_kind_from_string(o.theory);
  o.kl.jobs = g.jobs;
  CorpusFit fit;
  json jf;
  if (!o.trees_k.empty()) {
    std::map<int, std::vector<ModelTree>> by_k;
    for (const auto& spec : o.trees_k) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--trees-k expects K=path, got " + spec);
      by_k[static_cast<int>(parse_u64(spec.substr(0, eq)))] = sizes_of(load_trees(spec.substr(eq + 1)));
    }
    fit = select_k_star(by_k, o.kl, o.min_trees, o.corpus_id);
    for (const auto& [k, trees] : by_k) jf["mean_tree_rate"][std::to_string(k)] = mean_tree_rate(trees, k);
  } else {
    if (o.trees.empty()) throw CLI::ValidationError("fit", "one of --trees or --trees-k is required");
    const auto trees = sizes_of(load_trees(o.trees));
    const auto ks = parse_int_range(o.k_range);
    fit = select_k_star(trees, ks.front(), ks.back(), o.kl, o.min_trees, o.corpus_id);
    if (!trees.empty()) jf["mean_tree_rate"][std::to_string(trees.front().k())] = mean_tree_rate(trees, trees.front().k());
    if (o.bootstrap > 0) {
      const auto b = bootstrap_k_star(trees, ks.front(), ks.back(), o.bootstrap, g.seed, o.kl, o.min_trees);
      std::ostringstream csv;
      csv << "k,k_star_fraction\n";
      for (int k = ks.front(); k <= ks.back(); ++k) csv << k << ',' << b.fraction(k) << '\n';
      dir.write("bootstrap.csv", csv.str());
      jf["bootstrap_fraction_k_star"] = b.fraction(fit.k_star);
    }
    std::vector<EmpiricalScaling> pooled;
    for (int level : fit.levels_used()) pooled.push_back(pool_normalized_sizes(trees, level, o.kl.bins));
    std::ostringstream hist;
    write_histogram_csv(hist, pooled);
    dir.write("histograms.csv", hist.str());
  }
  std::ostringstream csv;
  write_score_table_csv(csv, std::span<const CorpusFit>(&fit, 1));
  dir.write("scores.csv", csv.str());

  jf["corpus_id"] = fit.corpus_id;
  jf["k_star"] = fit.k_star;
  jf["bins"] = fit.bins;
  jf["min_level_samples"] = fit.min_level_samples;
  jf["theory"] = std::string(to_string(fit.theory));
  jf["levels_used"] = fit.levels_used();
  for (const auto& s : fit.scores) {
    jf["scores"].push_back({{"k", s.k}, {"avg_kl", s.avg_kl}, {"levels", s.levels.size()}, {"floored_bins", s.floored_bins}});
    if (s.floored_bins > 0)
      std::cerr << "warning: K=" << s.k << ": " << s.floored_bins << " bins had theory mass below the floor\n";
  }
  dir.write("fit.json", jf.dump(2) + "\n");
  std::cout << "K    avg KL\n";
  for (const auto& s : fit.scores) std::printf("%-4d %.6f%s\n", s.k, s.avg_kl, s.k == fit.k_star ? "  <- K*" : "");
  return kOk;
}

// --- surprisal -------------------------------------------------------------

struct SurprisalOpts {
  std::string input;
  std::string log_base = "e";
  bool include_first = false;
  std::size_t min_series = 10;
  bool fetch = false;
  std::string corpus;
  ClientOpts client;
};

int run_surprisal(SurprisalOpts o, RunDir& dir) {
  std::vector<SurprisalSeries> series;
  if (o.fetch) {
    if (o.corpus.empty()) throw CLI::ValidationError("surprisal", "--fetch needs --corpus");
    o.client.cfg.audit_log = (dir.root() / "audit.jsonl").string();
    LogprobClient client(o.client.cfg);
    std::ostringstream lines;
    for (const auto& d : load_corpus(o.corpus)) {
      const auto lp = client.fetch(d.text);
      SurprisalSeries s{d.source_id, o.client.cfg.model, lp.tokens, lp.logprobs};
      validate(s);
      lines << to_json(s).dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
      series.push_back(std::move(s));
    }
    dir.write("series.jsonl", lines.str());
  } else {
    if (o.input.empty()) throw CLI::ValidationError("surprisal", "one of --input or --fetch is required");
    std::istringstream in(read_file(o.input));
    series = read_surprisal_jsonl(in, log_base_from_string(o.log_base));
  }
  std::ostringstream cum;
  write_cumulative_csv(cum, series, o.include_first);
  dir.write("cumulative.csv", cum.str());
  const auto reg = corpus_rate_regression(series, o.min_series, o.include_first);
  std::ostringstream per;
  per << "source_id,tokens,total_nats,rate_nats_per_token\n" << std::setprecision(12);
  for (const auto& t : reg.per_text) per << t.source_id << ',' << t.tokens << ',' << t.total << ',' << t.rate << '\n';
  dir.write("per_text.csv", per.str());
  const json j{{"h_llm_nats_per_token", reg.fit.slope}, {"intercept_nats", reg.fit.intercept},
               {"slope_stderr", reg.fit.slope_stderr}, {"ci_low", reg.fit.slope_ci_low},
               {"ci_high", reg.fit.slope_ci_high},     {"texts", reg.fit.n},
               {"include_first", o.include_first}};
  dir.write("regression.json", j.dump(2) + "\n");
  std::cout << "h_LLM = " << fmt(reg.fit.slope, 6) << " nats/token [" << fmt(reg.fit.slope_ci_low, 6) << ", "
            << fmt(reg.fit.slope_ci_high, 6) << "] over " << reg.fit.n << " texts\n";
  return kOk;
}

// --- report ----------------------------------------------------------------

struct ReportOpts {
  std::vector<std::string> entries;  // "id,fit_dir,surprisal_dir"
  double chars_per_token = 3.5;
};

int run_report(const ReportOpts& o, RunDir& dir) {
  if (o.chars_per_token <= 0.0) throw std::invalid_argument("--chars-per-token must be positive");
  std::ostringstream csv;
  csv << "corpus_id,k_star,h_tree_nats_per_token,h_llm_nats_per_token,h_llm_ci_low,h_llm_ci_high,"
         "h_tree_bits_per_char,h_llm_bits_per_char,chars_per_token\n"
      << std::setprecision(10);
  const double to_bpc = 1.0 / (std::numbers::ln2 * o.chars_per_token);
  std::cout << "corpus           K*   h_K* [nats/tok]   h_LLM [nats/tok]\n";
  for (const auto& e : o.entries) {
    std::vector<std::string> parts;
    std::stringstream ss(e);
    for (std::string p; std::getline(ss, p, ',');) parts.push_back(p);
    if (parts.size() != 3) throw std::invalid_argument("--entry expects id,fit_dir,surprisal_dir, got " + e);
    json fitj, regj;
    try {
      fitj = json::parse(read_file(std::filesystem::path(parts[1]) / "fit.json"));
      regj = json::parse(read_file(std::filesystem::path(parts[2]) / "regression.json"));
    } catch (const json::exception& ex) {
      throw InputError(e + ": " + ex.what());
    }
    const int k_star = fitj.at("k_star").get<int>();
    const double h_tree = entropy_rate(k_star).h;
    const double h_llm = regj.at("h_llm_nats_per_token").get<double>();
    csv << parts[0] << ',' << k_star << ',' << h_tree << ',' << h_llm << ',' << regj.at("ci_low").get<double>() << ','
        << regj.at("ci_high").get<double>() << ',' << h_tree * to_bpc << ',' << h_llm * to_bpc << ','
        << o.chars_per_token << '\n';
    std::printf("%-16s %-4d %-17.4f %.4f\n", parts[0].c_str(), k_star, h_tree, h_llm);
  }
  dir.write("report.csv", csv.str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semtree: random-tree ensembles, scaling functions and semantic chunk trees"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Read options from a TOML/INI file; command-line flags take precedence");
  Global g;
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--seed", g.seed, "Base random seed")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Worker threads")->capture_default_str()->check(CLI::Range(1u, 1024u));

  EntropyOpts eo;
  auto* entropy = app.add_subcommand("entropy", "Ensemble entropy H(N) and entropy-rate estimates");
  entropy->add_option("--k", eo.k, "Branching factor")->capture_default_str()->check(CLI::Range(2, 64));
  entropy->add_option("--n-ladder", eo.ladder, "Sizes: a..b (doubling), a..b:step or a,b,c")->capture_default_str();
  entropy->add_option("--methods", eo.methods, "Any of recursion, levelsum, enumeration")->capture_default_str();
  entropy->add_option("--levelsum-max", eo.levelsum_max, "Largest N for the level-sum method")->capture_default_str();

  EnumerateOpts no;
  auto* enumerate = app.add_subcommand("enumerate", "Exhaustive enumeration for small N");
  enumerate->add_option("--n", no.n)->capture_default_str()->check(CLI::Range(1, 12));
  enumerate->add_option("--k", no.k)->capture_default_str()->check(CLI::Range(2, 8));
  enumerate->add_option("--dump-cap", no.dump_cap, "Write the tree list only below this count")->capture_default_str();

  SimulateOpts so;
  auto* simulate = app.add_subcommand("simulate", "Sample trees and -(1/N) log P(T)");
  simulate->add_option("--k", so.k)->capture_default_str()->check(CLI::Range(2, 64));
  simulate->add_option("--n", so.n, "Root size (lower bound when --n-max is given)")->capture_default_str();
  simulate->add_option("--n-max", so.n_max, "Draw N uniformly from [n, n-max]");
  simulate->add_option("--samples", so.samples)->capture_default_str();
  simulate->add_flag("--save-trees", so.save_trees, "Write trees.jsonl");

  ScalingOpts co;
  auto* scaling = app.add_subcommand("scaling", "Scaling functions f_L and lognormal collapse data");
  scaling->add_option("--k", co.k)->capture_default_str()->check(CLI::Range(2, 64));
  scaling->add_option("--levels", co.levels)->capture_default_str();
  scaling->add_option("--points", co.points, "Grid points")->capture_default_str();
  scaling->add_option("--s-min", co.s_min, "Smallest grid value of s")->capture_default_str();

  ChunkOpts ko;
  auto* chunk = app.add_subcommand("chunk", "Build semantic trees for a corpus with an LLM");
  chunk->add_option("--corpus", ko.corpus, "Directory of .txt files, JSONL of {source_id,text}, or one file")->required();
  chunk->add_option("--k", ko.k)->capture_default_str()->check(CLI::Range(2, 64));
  add_client_options(chunk, ko.client, true);

  FitOpts fo;
  auto* fit = app.add_subcommand("fit", "Select K* by level-averaged KL divergence");
  fit->add_option("--trees", fo.trees, "Tree directory or JSONL scored against every K in --k-range");
  fit->add_option("--trees-k", fo.trees_k, "K=path: trees chunked at K (repeatable)");
  fit->add_option("--k-range", fo.k_range)->capture_default_str();
  fit->add_option("--corpus-id", fo.corpus_id)->capture_default_str();
  fit->add_option("--bins", fo.kl.bins)->capture_default_str();
  fit->add_option("--min-level-samples", fo.kl.min_level_samples)->capture_default_str();
  fit->add_option("--min-trees", fo.min_trees)->capture_default_str();
  fit->add_option("--theory", fo.theory)->capture_default_str()->check(CLI::IsMember({"finite-n", "continuum"}));
  fit->add_option("--bootstrap", fo.bootstrap, "Bootstrap resamples of K*")->capture_default_str();

  SurprisalOpts uo;
  auto* surprisal = app.add_subcommand("surprisal", "Ingest or fetch token log-probabilities and fit h_LLM");
  surprisal->add_option("--input", uo.input, "JSONL of {source_id, model_id, tokens, logprobs}");
  surprisal->add_option("--log-base", uo.log_base, "Base of input logprobs")->capture_default_str()->check(
      CLI::IsMember({"e", "nats", "2", "bits", "10"}));
  surprisal->add_flag("--include-first", uo.include_first, "Count the first token");
  surprisal->add_option("--min-series", uo.min_series)->capture_default_str();
  surprisal->add_flag("--fetch", uo.fetch, "Score --corpus with a completions endpoint");
  surprisal->add_option("--corpus", uo.corpus);
  add_client_options(surprisal, uo.client, false);

  ReportOpts ro;
  auto* report = app.add_subcommand("report", "Tree entropy rate at K* against h_LLM per corpus");
  report->add_option("--entry", ro.entries, "id,fit_dir,surprisal_dir (repeatable)")->required();
  report->add_option("--chars-per-token", ro.chars_per_token)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  const CLI::App* sub = app.get_subcommands().front();
  try {
    RunDir dir(g.out);
    dir.write_config({{"command", sub->get_name()}, {"options", resolved_options(app)}});
    int rc = kOk;
    if (sub == entropy) rc = run_entropy(eo, dir);
    else if (sub == enumerate) rc = run_enumerate(no, dir);
    else if (sub == simulate) rc = run_simulate(so, g, dir);
    else if (sub == scaling) rc = run_scaling(co, g, dir);
    else if (sub == chunk) rc = run_chunk(ko, dir);
    else if (sub == fit) rc = run_fit(fo, g, dir);
    else if (sub == surprisal) rc = run_surprisal(uo, dir);
    else if (sub == report) rc = run_report(ro, dir);
    dir.finish(sub->get_name());
    return rc;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const TransportError& e) {
    std::cerr << "network error: " << e.what() << '\n';
    return kNetworkError;
  } catch (const ClientConfigError& e) {
    std::cerr << "client error: " << e.what() << "\n  check --base-url, --model and the API key variable\n";
    return kNetworkError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  }
}
