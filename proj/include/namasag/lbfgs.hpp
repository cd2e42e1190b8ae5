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

// Limited-memory BFGS with a backtracking Armijo line search.

#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "namasag/common.hpp"

namespace namasag {

// Writes the gradient into `grad` and returns the objective value.
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct LbfgsOptions {
  std::size_t memory = 10;
  double gradient_tolerance = 1e-6;  // on the infinity norm
  int max_iterations = 500;
  double armijo = 1e-4;
  double initial_step = 1.0;
  int max_halvings = 50;
};

struct LbfgsResult {
  std::vector<double> x;
  double value = 0.0;
  double gradient_norm = 0.0;  // infinity norm at x
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double inf_norm(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

inline bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

struct CurvaturePair {
  std::vector<double> s;
  std::vector<double> y;
  double rho;  // 1 / (s'y)
};

// Two-loop recursion: returns -H g for the implicit inverse Hessian H.
inline std::vector<double> lbfgs_direction(const std::deque<CurvaturePair>& pairs,
                                           std::span<const double> g) {
  std::vector<double> q(g.begin(), g.end());
  std::vector<double> alpha(pairs.size());
  for (std::size_t k = pairs.size(); k-- > 0;) {
    alpha[k] = pairs[k].rho * dot(pairs[k].s, q);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] -= alpha[k] * pairs[k].y[i];
  }
  if (!pairs.empty()) {
    const auto& last = pairs.back();
    const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
    for (double& v : q) v *= gamma;
  }
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const double beta = pairs[k].rho * dot(pairs[k].y, q);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += (alpha[k] - beta) * pairs[k].s[i];
  }
  for (double& v : q) v = -v;
  return q;
}

}  // namespace detail

inline LbfgsResult lbfgs_minimize(const Objective& objective, std::span<const double> x0,
                                  const LbfgsOptions& opt = {}) {
  if (!detail::all_finite(x0)) throw NumericalError("lbfgs: non-finite starting point");
  const std::size_t n = x0.size();
  LbfgsResult res;
  res.x.assign(x0.begin(), x0.end());
  std::vector<double> g(n), g_new(n), x_new(n);
  double f = objective(res.x, g);
  if (!std::isfinite(f) || !detail::all_finite(g)) {
    throw NumericalError("lbfgs: non-finite objective or gradient at the starting point");
  }

  std::deque<detail::CurvaturePair> pairs;
  for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
    if (detail::inf_norm(g) < opt.gradient_tolerance) {
      res.converged = true;
      break;
    }
    bool steepest = pairs.empty();
    auto d = steepest ? std::vector<double>() : detail::lbfgs_direction(pairs, g);
    double dg = steepest ? 0.0 : detail::dot(d, g);
    if (steepest || !(dg < 0.0)) {
      pairs.clear();
      steepest = true;
      d.assign(g.size(), 0.0);
      for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
      dg = -detail::dot(g, g);
    }

    // Without curvature information the step is scaled to unit length.
    double step = steepest ? std::min(opt.initial_step, 1.0 / std::sqrt(-dg)) : opt.initial_step;
    double f_new = 0.0;
    bool accepted = false;
    for (int h = 0; h <= opt.max_halvings; ++h) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = res.x[i] + step * d[i];
      f_new = objective(x_new, g_new);
      if (std::isfinite(f_new) && detail::all_finite(g_new) &&
          f_new <= f + opt.armijo * step * dg) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      throw NumericalError("lbfgs: line search failed after " +
                           std::to_string(opt.max_halvings) + " halvings");
    }

    detail::CurvaturePair p;
    p.s.resize(n);
    p.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      p.s[i] = x_new[i] - res.x[i];
      p.y[i] = g_new[i] - g[i];
    }
    const double sy = detail::dot(p.s, p.y);
    if (sy > 1e-12 * std::sqrt(detail::dot(p.s, p.s) * detail::dot(p.y, p.y)) && sy > 0.0) {
      p.rho = 1.0 / sy;
      pairs.push_back(std::move(p));
      if (pairs.size() > opt.memory) pairs.pop_front();
    }
    res.x.swap(x_new);
    g.swap(g_new);
    f = f_new;
  }
  if (!res.converged && detail::inf_norm(g) < opt.gradient_tolerance) res.converged = true;
  res.value = f;
  res.gradient_norm = detail::inf_norm(g);
  return res;
}

}  // namespace namasag
