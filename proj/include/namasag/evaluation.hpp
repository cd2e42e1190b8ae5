// Copyright 2026 The namasag Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Agreement and significance statistics: quadratic weighted kappa, the 5x2cv
// paired t-test, Student-t tail probabilities and Cohen's d.

#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "namasag/common.hpp"

namespace namasag {

// Quadratic weighted kappa between two raters on the integer scale
// [min_rating, max_rating].
inline double qwk(std::span<const int> a, std::span<const int> b, int min_rating,
                  int max_rating) {
  if (a.size() != b.size()) throw UsageError("qwk: rating lists differ in length");
  if (a.empty()) throw UsageError("qwk: no ratings");
  if (max_rating <= min_rating) throw UsageError("qwk: rating range needs two classes");
  const auto k = static_cast<std::size_t>(max_rating - min_rating + 1);
  const std::size_t n = a.size();

  std::vector<double> observed(k * k, 0.0), hist_a(k, 0.0), hist_b(k, 0.0);
  bool identical = true;
  for (std::size_t t = 0; t < n; ++t) {
    if (a[t] < min_rating || a[t] > max_rating || b[t] < min_rating || b[t] > max_rating) {
      throw DataError("qwk: rating out of range at position " + std::to_string(t));
    }
    const auto i = static_cast<std::size_t>(a[t] - min_rating);
    const auto j = static_cast<std::size_t>(b[t] - min_rating);
    observed[i * k + j] += 1.0;
    hist_a[i] += 1.0;
    hist_b[j] += 1.0;
    identical = identical && i == j;
  }
  if (identical) return 1.0;

  const double denom_w = static_cast<double>((k - 1) * (k - 1));
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double di = static_cast<double>(i) - static_cast<double>(j);
      const double w = di * di / denom_w;
      num += w * observed[i * k + j];
      den += w * hist_a[i] * hist_b[j] / static_cast<double>(n);
    }
  }
  if (den == 0.0) {
    throw DegenerateError("qwk: degenerate marginals with disagreement present");
  }
  return 1.0 - num / den;
}

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 200;
  constexpr double kEps = 1e-12;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw NumericalError("incomplete beta: continued fraction did not converge");
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw UsageError("incomplete beta: a, b must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw UsageError("incomplete beta: x outside [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * detail::beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

// P(T > t) for Student's t with `df` degrees of freedom.
inline double student_t_upper_tail(double t, int df) {
  if (df < 1) throw UsageError("student_t_upper_tail: df must be >= 1");
  if (std::isnan(t)) throw NumericalError("student_t_upper_tail: t is NaN");
  if (t == 0.0) return 0.5;
  if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
  const double nu = static_cast<double>(df);
  const double x = nu / (nu + t * t);
  const double half_two_tail = 0.5 * regularized_incomplete_beta(0.5 * nu, 0.5, x);
  return t > 0 ? half_two_tail : 1.0 - half_two_tail;
}

// Per iteration i: differences (model A - model B) on the two half-folds.
struct FoldMetrics {
  std::array<std::array<double, 2>, 5> differences{};
};

struct TTestResult {
  double t_statistic = 0.0;
  double p_value_one_tailed = 0.5;
};

// Dietterich's 5x2cv paired t-test: t = p_1^(1) / sqrt(mean_i s_i^2) with 5
// degrees of freedom, upper one-tailed p-value.
inline TTestResult t_test_5x2(const FoldMetrics& metrics) {
  double sum_var = 0.0;
  for (const auto& [p1, p2] : metrics.differences) {
    if (!std::isfinite(p1) || !std::isfinite(p2)) {
      throw NumericalError("t_test_5x2: non-finite fold difference");
    }
    const double mean = 0.5 * (p1 + p2);
    sum_var += (p1 - mean) * (p1 - mean) + (p2 - mean) * (p2 - mean);
  }
  if (sum_var == 0.0) {
    throw DegenerateError("t_test_5x2: every per-iteration variance is zero");
  }
  TTestResult r;
  r.t_statistic = metrics.differences[0][0] / std::sqrt(sum_var / 5.0);
  r.p_value_one_tailed = student_t_upper_tail(r.t_statistic, 5);
  return r;
}

// Standardized mean difference with the pooled (n-1) standard deviation.
inline double cohens_d(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw UsageError("cohens_d: need >= 2 values per sample");
  auto mean_var = [](std::span<const double> s) {
    double m = 0.0;
    for (double v : s) m += v;
    m /= static_cast<double>(s.size());
    double ss = 0.0;
    for (double v : s) ss += (v - m) * (v - m);
    return std::pair{m, ss / static_cast<double>(s.size() - 1)};
  };
  const auto [ma, va] = mean_var(a);
  const auto [mb, vb] = mean_var(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
  if (!(pooled > 0.0)) throw DegenerateError("cohens_d: pooled variance is zero");
  return (ma - mb) / std::sqrt(pooled);
}

}  // namespace namasag
