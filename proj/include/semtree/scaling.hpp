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

// Large-N limit: scaling functions f_L(s), their lognormal collapse, Mellin
// moments, entropy-rate asymptotics and cumulant flow.
//
// Levels follow the f_1 = delta(s - 1) convention: f_L is the law of a product
// of L-1 independent Beta(1, K-1) variables.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "compositions.hpp"
#include "numeric.hpp"
#include "tree_ensemble.hpp"

namespace semtree {

struct LognormalParams {
  double mu = 0.0;
  double sigma = 0.0;
};

/// mu_L = -(L-1) H_{K-1}, sigma_L^2 = (L-1) H^{(2)}_{K-1}.
inline LognormalParams lognormal_params(int k, int level) {
  if (k < 2) throw std::invalid_argument("lognormal_params: k must be >= 2");
  if (level < 2) throw std::invalid_argument("lognormal_params: L must be >= 2");
  const double l = static_cast<double>(level - 1);
  return {-l * harmonic_number(k - 1), std::sqrt(l * harmonic_number(k - 1, 2))};
}

/// Closed form at K = 2: (-ln s)^{L-2} / (L-2)!.
inline double exact_f_k2(int level, double s) {
  if (!(s > 0.0 && s <= 1.0)) throw std::domain_error("exact_f_k2: s must lie in (0, 1]");
  if (level < 2) throw std::invalid_argument("exact_f_k2: L must be >= 2");
  const double m = static_cast<double>(level - 2);
  if (level == 2) return 1.0;
  return std::exp(m * std::log(-std::log(s)) - std::lgamma(m + 1.0));
}

/// (K-1)^{L-1} / (L-2)! (ln 1/s)^{L-2}.
inline double small_s_asymptote(int k, int level, double s) {
  if (level < 2) throw std::invalid_argument("small_s_asymptote: L must be >= 2");
  const double m = static_cast<double>(level - 2);
  const double lead = static_cast<double>(level - 1) * std::log(static_cast<double>(k - 1)) - std::lgamma(m + 1.0);
  if (level == 2) return std::exp(lead);
  return std::exp(lead + m * std::log(-std::log(s)));
}

/// (K-1)^{L-1} B(t+1, K-1)^{L-1}.
inline double mellin_moment(int k, int level, double t) {
  if (t <= -1.0) throw std::domain_error("mellin_moment: t must exceed -1");
  if (level < 1) throw std::invalid_argument("mellin_moment: L must be >= 1");
  const double km1 = static_cast<double>(k - 1);
  const double log_b = std::lgamma(t + 1.0) + std::lgamma(km1) - std::lgamma(t + 1.0 + km1);
  return std::exp(static_cast<double>(level - 1) * (std::log(km1) + log_b));
}

// ---------------------------------------------------------------------------
// Numerical scaling functions

struct GridSpec {
  std::size_t points = 4096;  // over [s_min, 1], log-uniform
  double s_min = 1e-12;
  bool auto_extend = true;    // extend leftwards, same spacing, to cover mu_L - extend_sigmas sigma_L
  double extend_sigmas = 10.0;
};

class GridTooCoarse : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// f_L on a log-uniform grid u_i = ln s_i, u_{n-1} = 0. L = 1 is the point
/// mass at s = 1 and carries no grid.
class ScalingCurve {
 public:
  ScalingCurve() = default;
  ScalingCurve(int k, int level, GridSpec spec, double step, std::vector<double> s, std::vector<double> f,
               double tail)
      : k_(k), level_(level), spec_(spec), step_(step), s_(std::move(s)), f_(std::move(f)), tail_(tail) {
    build_cdf();
  }

  static ScalingCurve point_mass(int k) {
    ScalingCurve c;
    c.k_ = k;
    c.level_ = 1;
    return c;
  }

  int k() const noexcept { return k_; }
  int level() const noexcept { return level_; }
  bool is_point_mass() const noexcept { return level_ == 1; }
  const GridSpec& grid_spec() const noexcept { return spec_; }
  double log_step() const noexcept { return step_; }
  const std::vector<double>& grid() const noexcept { return s_; }
  const std::vector<double>& density() const noexcept { return f_; }
  const std::vector<double>& cdf_values() const noexcept { return cdf_; }
  /// Mass below the grid, estimated from the small-s asymptote.
  double tail_mass() const noexcept { return tail_; }
  double u_min() const { return std::log(s_.front()); }

  /// Density at arbitrary s (cubic interpolation in ln s).
  double operator()(double s) const {
    require_grid();
    if (s > 1.0 || s <= 0.0) return 0.0;
    const double u = std::log(s);
    if (u < u_min()) return f_.front() * small_s_asymptote(k_, level_, s) / small_s_asymptote(k_, level_, s_.front());
    const auto [i, t] = locate(u);
    return std::max(0.0, cubic(f_, i, t));
  }

  double cdf(double s) const {
    if (is_point_mass()) return s >= 1.0 ? 1.0 : 0.0;
    if (s >= 1.0) return cdf_.back();
    if (s <= 0.0) return 0.0;
    const double u = std::log(s);
    if (u < u_min()) {
      const double a = -u_min();
      return tail_ * boost::math::gamma_q(static_cast<double>(level_ - 1), -u) /
             boost::math::gamma_q(static_cast<double>(level_ - 1), a);
    }
    const auto [i, t] = locate(u);
    if (i + 1 >= s_.size()) return cdf_.back();
    // Cubic Hermite on F with dF/du = f e^u.
    const double g0 = f_[i] * s_[i] * step_, g1 = f_[i + 1] * s_[i + 1] * step_;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * cdf_[i] + (t3 - 2 * t2 + t) * g0 + (-2 * t3 + 3 * t2) * cdf_[i + 1] +
           (t3 - t2) * g1;
  }

  /// Integral of f over the grid plus the tail estimate.
  double normalization() const { return is_point_mass() ? 1.0 : moment(0.0); }

  /// Integral of s^t f ds.
  double moment(double t) const {
    if (is_point_mass()) return 1.0;
    std::vector<double> g(f_.size());
    for (std::size_t i = 0; i < f_.size(); ++i) g[i] = f_[i] * std::pow(s_[i], t + 1.0);
    return GregoryRule().integrate(g, step_) + tail_ * std::pow(s_.front(), t);
  }

 private:
  void require_grid() const {
    if (is_point_mass()) throw std::logic_error("scaling curve at L=1 is a point mass at s=1");
  }

  std::pair<std::size_t, double> locate(double u) const {
    const double pos = (u - u_min()) / step_;
    const auto n = s_.size();
    auto i = static_cast<std::size_t>(std::clamp(std::floor(pos), 0.0, static_cast<double>(n - 1)));
    if (i >= n - 1) return {n - 1, 0.0};
    return {i, pos - static_cast<double>(i)};
  }

  // Four-point Lagrange through i-1..i+2 (shifted at the ends), t in [0,1) from node i.
  static double cubic(const std::vector<double>& y, std::size_t i, double t) {
    const std::size_t n = y.size();
    if (n < 4) return y[i] + (i + 1 < n ? t * (y[i + 1] - y[i]) : 0.0);
    std::size_t b = (i == 0) ? 0 : i - 1;
    if (b + 3 >= n) b = n - 4;
    const double x = static_cast<double>(i - b) + t;
    double r = 0.0;
    for (std::size_t a = 0; a < 4; ++a) {
      double l = 1.0;
      for (std::size_t c = 0; c < 4; ++c)
        if (c != a) l *= (x - static_cast<double>(c)) / (static_cast<double>(a) - static_cast<double>(c));
      r += l * y[b + a];
    }
    return r;
  }

  void build_cdf() {
    const std::size_t n = s_.size();
    cdf_.assign(n, 0.0);
    if (n == 0) return;
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = f_[i] * s_[i];
    CompensatedSum acc;
    acc.add(tail_);
    cdf_[0] = tail_;
    const double h = step_;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      double piece;
      if (n < 4)
        piece = 0.5 * h * (g[i] + g[i + 1]);
      else if (i == 0)
        piece = h / 12.0 * (5 * g[0] + 8 * g[1] - g[2]);
      else if (i + 2 >= n)
        piece = h / 12.0 * (-g[i - 1] + 8 * g[i] + 5 * g[i + 1]);
      else
        piece = h / 24.0 * (-g[i - 1] + 13 * g[i] + 13 * g[i + 1] - g[i + 2]);
      acc.add(piece);
      cdf_[i + 1] = acc.value();
    }
  }

  int k_ = 2;
  int level_ = 1;
  GridSpec spec_;
  double step_ = 0.0;
  std::vector<double> s_;
  std::vector<double> f_;
  std::vector<double> cdf_;
  double tail_ = 0.0;
};

/// Grid actually used for (k, L): the spacing of `spec` and, with
/// auto_extend, enough extra points on the left to cover mu_L - extend_sigmas sigma_L.
inline GridSpec resolve_grid(int k, int level, GridSpec spec) {
  if (spec.points < 8) throw GridTooCoarse("scaling grid needs at least 8 points");
  if (!(spec.s_min > 0.0 && spec.s_min < 1.0)) throw std::invalid_argument("grid s_min must lie in (0, 1)");
  if (!spec.auto_extend || level < 2) return spec;
  const double h = -std::log(spec.s_min) / static_cast<double>(spec.points - 1);
  const auto p = lognormal_params(k, level);
  const double target = p.mu - spec.extend_sigmas * p.sigma;
  GridSpec out = spec;
  out.auto_extend = false;
  if (target < std::log(spec.s_min)) {
    const auto intervals = static_cast<std::size_t>(std::ceil(-target / h));
    out.points = intervals + 1;
    out.s_min = std::exp(-static_cast<double>(intervals) * h);
  }
  return out;
}

namespace detail {

/// One Mellin convolution step with the Beta(1, K-1) kernel in u = ln s:
/// f_L(u) = int_u^0 f_{L-1}(w) kappa(w - u) dw, kappa(d) = (K-1)(1 - e^{-d})^{K-2}.
inline std::vector<double> mellin_step(std::span<const double> prev, std::span<const double> kappa, double h,
                                       unsigned jobs) {
  const std::size_t n = prev.size();
  std::vector<double> next(n, 0.0);
  const GregoryRule rule;
  std::vector<std::vector<double>> corrections(GregoryRule::kMaxOrder + 1);
  for (int p = 0; p <= GregoryRule::kMaxOrder; ++p)
    corrections[static_cast<std::size_t>(p)] = GregoryRule(p).end_weights(1000);
  auto row = [&](std::size_t i) {
    const std::size_t m = n - 1 - i;  // intervals
    if (m == 0) return 0.0;
    const auto& c = corrections[static_cast<std::size_t>(rule.order_for(m))];
    CompensatedSum s;
    for (std::size_t j = i; j < n; ++j) s.add(prev[j] * kappa[j - i]);
    for (std::size_t q = 0; q < c.size(); ++q) {
      s.add(c[q] * prev[i + q] * kappa[q]);
      s.add(c[q] * prev[n - 1 - q] * kappa[m - q]);
    }
    return h * s.value();
  };
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < n; i += stride) next[i] = row(i);
  };
  if (jobs <= 1 || n < 2048) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(work, j, jobs);
  }
  return next;
}

}  // namespace detail

/// f_L by L-2 numerical Mellin convolutions of f_2(s) = (K-1)(1-s)^{K-2}.
/// Throws GridTooCoarse if the result fails to normalize within 1e-3.
inline ScalingCurve scaling_function(int k, int level, GridSpec spec = {}, unsigned jobs = 1) {
  if (k < 2) throw std::invalid_argument("scaling_function: k must be >= 2");
  if (level < 1) throw std::invalid_argument("scaling_function: L must be >= 1");
  if (level == 1) return ScalingCurve::point_mass(k);
  const GridSpec g = resolve_grid(k, level, spec);
  const std::size_t n = g.points;
  const double h = -std::log(g.s_min) / static_cast<double>(n - 1);
  std::vector<double> s(n), f(n), kappa(n);
  const double km1 = static_cast<double>(k - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = -static_cast<double>(n - 1 - i) * h;
    s[i] = std::exp(u);
    f[i] = km1 * std::pow(-std::expm1(u), k - 2);
    kappa[i] = km1 * std::pow(-std::expm1(-static_cast<double>(i) * h), k - 2);
  }
  s.back() = 1.0;
  for (int l = 3; l <= level; ++l) f = detail::mellin_step(f, kappa, h, jobs);
  const double tail = std::pow(km1, level - 1) *
                      boost::math::gamma_q(static_cast<double>(level - 1), -std::log(g.s_min));
  ScalingCurve curve(k, level, g, h, std::move(s), std::move(f), tail);
  const double norm = curve.normalization();
  if (std::abs(norm - 1.0) > 1e-3)
    throw GridTooCoarse("f_" + std::to_string(level) + " (K=" + std::to_string(k) + ") normalizes to " +
                        std::to_string(norm) + "; refine the grid (more points or smaller s_min)");
  return curve;
}

struct RefinementReport {
  double max_abs = 0.0;  // max |f_h - f_{h/2}| on shared nodes
  double max_rel = 0.0;  // max_abs / max f
};

/// Compares f_L on its grid against the same computation at half the spacing.
inline RefinementReport refinement_error(int k, int level, GridSpec spec = {}, unsigned jobs = 1) {
  const GridSpec coarse = resolve_grid(k, level, spec);
  GridSpec fine = coarse;
  fine.points = 2 * coarse.points - 1;
  const auto a = scaling_function(k, level, coarse, jobs);
  const auto b = scaling_function(k, level, fine, jobs);
  RefinementReport r;
  double peak = 0.0;
  for (std::size_t i = 0; i < a.density().size(); ++i) {
    r.max_abs = std::max(r.max_abs, std::abs(a.density()[i] - b.density()[2 * i]));
    peak = std::max(peak, std::abs(b.density()[2 * i]));
  }
  r.max_rel = peak > 0.0 ? r.max_abs / peak : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Standardization and collapse

/// x = (ln s - mu) / sigma; rejects s outside (0, 1].
inline std::vector<double> standardize(std::span<const double> samples, const LognormalParams& p) {
  std::vector<double> x;
  x.reserve(samples.size());
  for (double s : samples) {
    if (!(s > 0.0 && s <= 1.0)) throw std::domain_error("standardize: samples must lie in (0, 1]");
    x.push_back((std::log(s) - p.mu) / p.sigma);
  }
  return x;
}

/// Standardized log-size samples (input already ln s).
inline std::vector<double> standardize_log(std::span<const double> log_s, const LognormalParams& p) {
  std::vector<double> x;
  x.reserve(log_s.size());
  for (double u : log_s) x.push_back((u - p.mu) / p.sigma);
  return x;
}

struct StandardizedCurve {
  std::vector<double> x;
  std::vector<double> density;  // density in x: f(s) s sigma
};

inline StandardizedCurve standardize(const ScalingCurve& c, const LognormalParams& p) {
  if (c.is_point_mass()) throw std::invalid_argument("standardize: L=1 has no density");
  StandardizedCurve out;
  out.x.reserve(c.grid().size());
  out.density.reserve(c.grid().size());
  for (std::size_t i = 0; i < c.grid().size(); ++i) {
    const double s = c.grid()[i];
    out.x.push_back((std::log(s) - p.mu) / p.sigma);
    out.density.push_back(c.density()[i] * s * p.sigma);
  }
  return out;
}

/// CDF of the standardized variable.
inline double standardized_cdf(const ScalingCurve& c, const LognormalParams& p, double x) {
  return c.cdf(std::exp(p.mu + p.sigma * x));
}

/// sup_x |F_x(x) - Phi(x)|, evaluated on the grid nodes and at s = 1.
inline double ks_distance_to_normal(const ScalingCurve& c, const LognormalParams& p) {
  if (c.is_point_mass()) throw std::invalid_argument("ks_distance_to_normal: L=1 has no density");
  double d = 0.0;
  for (std::size_t i = 0; i < c.grid().size(); ++i) {
    const double x = (std::log(c.grid()[i]) - p.mu) / p.sigma;
    d = std::max(d, std::abs(c.cdf_values()[i] - standard_normal_cdf(x)));
  }
  d = std::max(d, std::abs(1.0 - standard_normal_cdf(-p.mu / p.sigma)));
  return d;
}

/// CSV: s,f_L,x,phi
inline void write_curve_csv(std::ostream& os, const ScalingCurve& c) {
  os << "s,f_L,x,phi\n";
  if (c.is_point_mass()) return;
  const auto p = lognormal_params(c.k(), c.level());
  const auto st = standardize(c, p);
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < c.grid().size(); ++i)
    os << c.grid()[i] << ',' << c.density()[i] << ',' << st.x[i] << ',' << st.density[i] << '\n';
  os.precision(old);
}

// ---------------------------------------------------------------------------
// Entropy rate

enum class RateMethod { recursion_slope, residue_series, large_k_expansion, exact_k2_series };

inline std::string_view to_string(RateMethod m) {
  switch (m) {
    case RateMethod::recursion_slope: return "recursion-slope";
    case RateMethod::residue_series: return "residue-series";
    case RateMethod::large_k_expansion: return "large-K-expansion";
    case RateMethod::exact_k2_series: return "exact-K2-series";
  }
  return "?";
}

struct EntropyRate {
  int k = 0;
  double h = 0.0;  // nats per leaf
  RateMethod method = RateMethod::recursion_slope;
  double error = 0.0;  // ladder drift, tail bound, or 0 when not estimated
  bool converged = true;
};

inline std::vector<std::uint64_t> default_rate_ladder() { return {512, 1024, 2048, 4096, 8192}; }

/// Least-squares slope of H(N) over a geometric ladder; `error` is the change
/// between the last two consecutive pair slopes, `converged` is error <= 1% of h.
inline EntropyRate entropy_rate(int k, std::span<const std::uint64_t> ladder = {}) {
  if (k < 2 || k > 64) throw std::invalid_argument("entropy_rate: k must lie in [2, 64]");
  std::vector<std::uint64_t> ns(ladder.begin(), ladder.end());
  if (ns.empty()) ns = default_rate_ladder();
  if (ns.size() < 2) throw std::invalid_argument("entropy_rate: ladder needs at least two sizes");
  std::sort(ns.begin(), ns.end());
  const auto table = EntropyRecursion::shared().table(ns.back(), k);
  std::vector<double> x, y;
  for (auto n : ns) {
    x.push_back(static_cast<double>(n));
    y.push_back(table[n]);
  }
  const auto fit = least_squares(x, y);
  EntropyRate r{k, fit.slope, RateMethod::recursion_slope, 0.0, true};
  if (ns.size() >= 3) {
    auto pair = [&](std::size_t i) { return (y[i + 1] - y[i]) / (x[i + 1] - x[i]); };
    r.error = std::abs(pair(ns.size() - 2) - pair(ns.size() - 3));
  }
  r.converged = r.error <= 0.01 * std::abs(r.h);
  return r;
}

/// h_2 = 2 sum_{m>=2} ln(m+1) / ((m+2)(m+3)).
inline EntropyRate exact_k2_rate() {
  const auto sum = sum_decreasing_series(
      [](double m) { return 2.0 * std::log1p(m) / ((m + 2.0) * (m + 3.0)); }, 2, 1e-8);
  return {2, sum.value, RateMethod::exact_k2_series, sum.tail_bound, true};
}

/// Leading-residue approximation (valid for K >> 1):
/// h_K = 1/(H_K - 1) sum_{n>=2} ln Z_K(n) / (n(n-1)).
inline EntropyRate residue_rate(int k) {
  if (k < 2) throw std::invalid_argument("residue_rate: k must be >= 2");
  const double norm = harmonic_number(k) - 1.0;
  const auto sum = sum_decreasing_series(
      [k](double n) { return log_count_weak_compositions(n, k) / (n * (n - 1.0)); }, 2, 1e-8 * norm);
  return {k, sum.value / norm, RateMethod::residue_series, sum.tail_bound / norm, true};
}

struct ResiduePole {
  std::complex<double> z;
  std::complex<double> weight;  // 1 / sum_{m=0}^{K-2} (z+m)^{-1}
};

/// Roots of prod_{m=0}^{K-2} (z+m) = K! (Durand-Kerner), real part descending.
/// The leading root is z = 2; the others are reported but not used in the rate.
inline std::vector<ResiduePole> residue_poles(int k) {
  if (k < 2) throw std::invalid_argument("residue_poles: k must be >= 2");
  const int deg = k - 1;
  const double log_kfact = std::lgamma(static_cast<double>(k) + 1.0);
  using C = std::complex<double>;
  // P(z)/K! = prod (z+m)/K! - 1, evaluated in scaled form to stay in range.
  auto p = [&](C z) {
    C prod = 1.0;
    const double scale = std::exp(log_kfact / deg);
    for (int m = 0; m < deg; ++m) prod *= (z + static_cast<double>(m)) / scale;
    return prod - 1.0;
  };
  const double radius = std::exp(log_kfact / deg);
  std::vector<C> roots(static_cast<std::size_t>(deg));
  const C seed(0.4, 0.9);
  for (int j = 0; j < deg; ++j) roots[static_cast<std::size_t>(j)] = radius * std::pow(seed, j) - static_cast<double>(deg) / 2.0;
  const double scale = std::exp(log_kfact / deg);
  for (int iter = 0; iter < 2000; ++iter) {
    double change = 0.0;
    for (int i = 0; i < deg; ++i) {
      C denom = 1.0;
      for (int j = 0; j < deg; ++j)
        if (j != i) denom *= (roots[static_cast<std::size_t>(i)] - roots[static_cast<std::size_t>(j)]) / scale;
      const C delta = p(roots[static_cast<std::size_t>(i)]) / denom;
      roots[static_cast<std::size_t>(i)] -= delta;
      change = std::max(change, std::abs(delta));
    }
    if (change < 1e-14 * radius) break;
  }
  std::vector<ResiduePole> out;
  for (const auto& z : roots) {
    C s = 0.0;
    for (int m = 0; m < deg; ++m) s += 1.0 / (z + static_cast<double>(m));
    out.push_back({z, 1.0 / s});
  }
  std::sort(out.begin(), out.end(), [](const ResiduePole& a, const ResiduePole& b) {
    return a.z.real() != b.z.real() ? a.z.real() > b.z.real() : a.z.imag() > b.z.imag();
  });
  return out;
}

/// Bracketed expansion alone (the leading terms of sum ln Z_K(n) / (n(n-1))).
inline double large_k_series_sum(int k) {
  const double lk = std::log(static_cast<double>(k));
  return 0.5 * lk * lk + (1.0 + std::numbers::egamma) * lk + std::numbers::pi * std::numbers::pi / 12.0 -
         std::numbers::ln2;
}

/// Large-K expansion of the residue series including its 1/(H_K - 1) prefactor:
/// [ (ln K)^2 / 2 + (1 + gamma) ln K + pi^2/12 - ln 2 ] / (H_K - 1).
inline EntropyRate large_k_rate(int k) {
  if (k < 2) throw std::invalid_argument("large_k_rate: k must be >= 2");
  return {k, large_k_series_sum(k) / (harmonic_number(k) - 1.0), RateMethod::large_k_expansion, 0.0, true};
}

// ---------------------------------------------------------------------------
// Cumulant flow

/// n draws of ln(prod of L-1 Beta(1, K-1)); stream i uses derive_seed(seed, i).
inline std::vector<double> sample_log_beta_product(int k, int level, std::size_t n, std::uint64_t seed,
                                                   unsigned jobs = 1) {
  if (k < 2 || level < 1) throw std::invalid_argument("sample_log_beta_product: need k >= 2, L >= 1");
  std::vector<double> out(n, 0.0);
  const double inv = 1.0 / static_cast<double>(k - 1);
  constexpr std::size_t kBlock = 4096;
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t b = begin; b < blocks; b += stride) {
      std::mt19937_64 rng(derive_seed(seed, b));
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      for (std::size_t i = b * kBlock; i < std::min(n, (b + 1) * kBlock); ++i) {
        double acc = 0.0;
        for (int l = 1; l < level; ++l) acc += std::log1p(-std::pow(unif(rng), inv));
        out[i] = acc;
      }
    }
  };
  jobs = std::max(1u, jobs);
  if (jobs == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(work, j, jobs);
  }
  return out;
}

/// Standardized cumulants g_m = kappa_m / kappa_2^{m/2} for m = 3..max_order.
/// Orders 3 and 4 use unbiased k-statistics; orders 5 and 6 use moment-based
/// cumulants. Returned vector index 0 holds m = 3.
inline std::vector<double> standardized_cumulants(std::span<const double> samples, int max_order) {
  if (max_order < 3 || max_order > 6) throw std::invalid_argument("standardized_cumulants: order must lie in [3, 6]");
  const std::size_t count = samples.size();
  if (count < static_cast<std::size_t>(4 * max_order))
    throw std::invalid_argument("standardized_cumulants: too few samples for order " + std::to_string(max_order));
  const double n = static_cast<double>(count);
  const double mean = compensated_total(samples) / n;
  CompensatedSum s2, s3, s4, s5, s6;
  for (double v : samples) {
    const double d = v - mean, d2 = d * d;
    s2.add(d2);
    s3.add(d2 * d);
    s4.add(d2 * d2);
    s5.add(d2 * d2 * d);
    s6.add(d2 * d2 * d2);
  }
  const double m2 = s2.value() / n, m3 = s3.value() / n, m4 = s4.value() / n, m5 = s5.value() / n,
               m6 = s6.value() / n;
  const double k2 = n / (n - 1.0) * m2;
  const double k3 = n * n / ((n - 1.0) * (n - 2.0)) * m3;
  const double k4 = n * n * ((n + 1.0) * m4 - 3.0 * (n - 1.0) * m2 * m2) / ((n - 1.0) * (n - 2.0) * (n - 3.0));
  const double c5 = m5 - 10.0 * m3 * m2;
  const double c6 = m6 - 15.0 * m4 * m2 - 10.0 * m3 * m3 + 30.0 * m2 * m2 * m2;
  const double cum[] = {k3, k4, c5, c6};
  std::vector<double> g;
  for (int m = 3; m <= max_order; ++m) g.push_back(cum[m - 3] / std::pow(k2, 0.5 * m));
  return g;
}

struct CumulantFlow {
  int order = 3;
  std::vector<int> levels;
  std::vector<double> g;
  double slope = 0.0;  // d ln|g| / d ln(L-1), L-1 being the number of Beta factors
};

/// Log-log slope of |g_m(L)| over the given levels from Monte-Carlo Beta products.
inline CumulantFlow cumulant_flow(int k, int order, std::span<const int> levels, std::size_t samples,
                                  std::uint64_t seed, unsigned jobs = 1) {
  CumulantFlow flow;
  flow.order = order;
  std::vector<double> x, y;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const int level = levels[i];
    const auto draws = sample_log_beta_product(k, level, samples, derive_seed(seed, 1000 + i), jobs);
    const double g = standardized_cumulants(draws, order)[static_cast<std::size_t>(order - 3)];
    flow.levels.push_back(level);
    flow.g.push_back(g);
    x.push_back(std::log(static_cast<double>(level - 1)));
    y.push_back(std::log(std::abs(g)));
  }
  flow.slope = least_squares(x, y).slope;
  return flow;
}

}  // namespace semtree
