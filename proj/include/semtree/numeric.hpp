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

// Small numerical toolbox shared by the ensemble, scaling and measurement code.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

namespace semtree {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double compensated_total(std::span<const double> xs) noexcept {
  CompensatedSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

/// Gregory end-corrected trapezoid rule on a uniform grid.
///
/// Weights (unit spacing) for integrating over `intervals` intervals. The
/// correction order is reduced for short ranges; with the full order the rule
/// integrates polynomials of degree <= 7 exactly.
class GregoryRule {
 public:
  static constexpr int kMaxOrder = 6;

  explicit GregoryRule(int order = kMaxOrder) : order_(std::clamp(order, 0, kMaxOrder)) {}

  int order_for(std::size_t intervals) const noexcept {
    // Each end correction uses order+1 points; keep the two ends disjoint.
    const int fit = static_cast<int>(intervals / 2) - 1;
    return std::max(0, std::min(order_, fit));
  }

  /// End-correction weights c[0..order] applied symmetrically: the full weight
  /// of point j from the left end is 1 + c[j] (j <= order), likewise from the
  /// right end, interior points weigh 1, and the two end points carry the
  /// trapezoid halves already folded into c[0].
  std::vector<double> end_weights(std::size_t intervals) const {
    const int p = order_for(intervals);
    std::vector<double> c(static_cast<std::size_t>(p) + 1, 0.0);
    c[0] = -0.5;
    if (intervals == 0) return c;
    // Gregory: -sum_k g_k [nabla^k f_n + (-1)^k Delta^k f_0], expanded in nodal values.
    for (int kk = 1; kk <= p; ++kk) {
      const double g = kGregory[static_cast<std::size_t>(kk - 1)];
      for (int j = 0; j <= kk; ++j) {
        // (-1)^k Delta^k f_0 = sum_j (-1)^j C(k,j) f_j  (same form as nabla^k f_n)
        const double coef = binom(kk, j) * ((j % 2) ? -1.0 : 1.0);
        c[static_cast<std::size_t>(j)] -= g * coef;
      }
    }
    return c;
  }

  /// Full weight vector of length intervals+1 (unit spacing).
  std::vector<double> weights(std::size_t intervals) const {
    std::vector<double> w(intervals + 1, 1.0);
    if (intervals == 0) {
      w[0] = 0.0;
      return w;
    }
    const auto c = end_weights(intervals);
    for (std::size_t j = 0; j < c.size(); ++j) {
      w[j] += c[j];
      w[intervals - j] += c[j];
    }
    return w;
  }

  /// Integrates uniformly spaced samples with spacing h.
  double integrate(std::span<const double> f, double h) const {
    if (f.size() < 2) return 0.0;
    const auto w = weights(f.size() - 1);
    CompensatedSum s;
    for (std::size_t j = 0; j < f.size(); ++j) s.add(w[j] * f[j]);
    return h * s.value();
  }

 private:
  static double binom(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
  }

  static constexpr std::array<double, kMaxOrder> kGregory = {
      1.0 / 12.0, 1.0 / 24.0, 19.0 / 720.0, 3.0 / 160.0, 863.0 / 60480.0, 275.0 / 24192.0};
  int order_;
};

/// Composite Simpson rule for a callable on [a, b] with an even number of panels.
template <class F>
double simpson(F&& f, double a, double b, std::size_t panels) {
  if (panels % 2) ++panels;
  const double h = (b - a) / static_cast<double>(panels);
  CompensatedSum s;
  s.add(f(a));
  s.add(f(b));
  for (std::size_t i = 1; i < panels; ++i) s.add((i % 2 ? 4.0 : 2.0) * f(a + h * static_cast<double>(i)));
  return s.value() * h / 3.0;
}

/// Integral of a positive, eventually decreasing g over [x0, inf) via
/// x = x0 e^v; g(x) x must decay as v grows.
template <class F>
double integrate_to_infinity(F&& g, double x0, double v_max = 60.0, std::size_t panels = 20000) {
  return simpson([&](double v) {
    const double x = x0 * std::exp(v);
    return g(x) * x;
  }, 0.0, v_max, panels);
}

/// Result of summing a positive decreasing series with an integral tail.
struct SeriesSum {
  double value = 0.0;
  double tail_bound = 0.0;  // half-width of the tail bracket
  std::size_t terms = 0;
};

/// sum_{n >= first} term(n) for a positive term that is decreasing for n >= first.
/// The tail after M is bracketed by the integrals of the continuous extension
/// over [M+1, inf) and [M, inf); M doubles until the bracket half-width is below tol.
template <class Term>
SeriesSum sum_decreasing_series(Term&& term, std::size_t first, double tol = 1e-8) {
  CompensatedSum head;
  std::size_t n = first;
  std::size_t m = std::max<std::size_t>(first + 64, 1024);
  while (true) {
    for (; n <= m; ++n) head.add(term(static_cast<double>(n)));
    const double upper = integrate_to_infinity(term, static_cast<double>(m));
    const double lower = integrate_to_infinity(term, static_cast<double>(m + 1));
    const double half = 0.5 * (upper - lower);
    if (half < tol || m > (std::size_t{1} << 34)) {
      return SeriesSum{head.value() + 0.5 * (upper + lower), half, m - first + 1};
    }
    m *= 2;
  }
}

inline double standard_normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Asymptotic Kolmogorov distribution survival function Q_KS(lambda).
inline double kolmogorov_survival(double lambda) noexcept {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 200; ++j) {
    const double term = ((j % 2) ? 2.0 : -2.0) * std::exp(-2.0 * j * j * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

/// p-value of a one-sample KS statistic d over n samples (Stephens' correction).
inline double ks_pvalue(double d, std::size_t n) noexcept {
  const double rn = std::sqrt(static_cast<double>(n));
  return kolmogorov_survival((rn + 0.12 + 0.11 / rn) * d);
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double slope_ci_low = 0.0;
  double slope_ci_high = 0.0;
  std::size_t n = 0;
};

/// Ordinary least squares y = a + b x with a 95% t-interval on b.
inline LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("least_squares: size mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("least_squares: need at least two points");
  CompensatedSum sx, sy;
  for (std::size_t i = 0; i < n; ++i) {
    sx.add(x[i]);
    sy.add(y[i]);
  }
  const double mx = sx.value() / static_cast<double>(n);
  const double my = sy.value() / static_cast<double>(n);
  CompensatedSum sxx, sxy;
  for (std::size_t i = 0; i < n; ++i) {
    sxx.add((x[i] - mx) * (x[i] - mx));
    sxy.add((x[i] - mx) * (y[i] - my));
  }
  if (sxx.value() <= 0.0) throw std::domain_error("least_squares: degenerate x spread");
  LinearFit fit;
  fit.n = n;
  fit.slope = sxy.value() / sxx.value();
  fit.intercept = my - fit.slope * mx;
  if (n > 2) {
    CompensatedSum rss;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - fit.intercept - fit.slope * x[i];
      rss.add(r * r);
    }
    fit.slope_stderr = std::sqrt(rss.value() / static_cast<double>(n - 2) / sxx.value());
    const boost::math::students_t dist(static_cast<double>(n - 2));
    const double t = boost::math::quantile(dist, 0.975);
    fit.slope_ci_low = fit.slope - t * fit.slope_stderr;
    fit.slope_ci_high = fit.slope + t * fit.slope_stderr;
  } else {
    fit.slope_ci_low = fit.slope_ci_high = fit.slope;
  }
  return fit;
}

inline double harmonic_number(int n, int power = 1) noexcept {
  double s = 0.0;
  for (int i = n; i >= 1; --i) s += 1.0 / std::pow(static_cast<double>(i), power);
  return s;
}

}  // namespace semtree
