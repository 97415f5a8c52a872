// Copyright 2026 The Chatlink Authors
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

#pragma once

// Limited-memory BFGS with a strong-Wolfe line search, and a central
// finite-difference gradient checker.
//
// An objective is any callable `double f(std::span<const double> x,
// std::span<double> grad)` that returns f(x) and writes its gradient.

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chatlink/error.hpp"

namespace chatlink {

struct OptimConfig {
  int memory = 10;
  int max_iters = 1000;
  double grad_tol = 1e-6;  // infinity norm
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_line_search_steps = 40;

  void validate() const {
    if (!(0.0 < c1 && c1 < c2 && c2 < 1.0))
      throw ValidationError("Wolfe constants need 0 < c1 < c2 < 1");
    if (memory < 1) throw ValidationError("L-BFGS memory must be at least 1");
    if (max_iters < 0 || max_line_search_steps < 1)
      throw ValidationError("iteration limits must be positive");
    if (!(grad_tol >= 0.0)) throw ValidationError("grad_tol must be non-negative");
  }
};

enum class OptimStatus { Converged, MaxIters, LineSearchFailed };

inline std::string_view status_name(OptimStatus s) {
  switch (s) {
    case OptimStatus::Converged: return "converged";
    case OptimStatus::MaxIters: return "max_iters";
    case OptimStatus::LineSearchFailed: return "line_search_failed";
  }
  return "unknown";
}

struct OptimReport {
  int iterations = 0;
  int evaluations = 0;
  double value = 0.0;
  double grad_norm = 0.0;
  OptimStatus status = OptimStatus::MaxIters;
  std::vector<double> history;  // objective value after each accepted step, history[0] = f(x0)
};

struct OptimResult {
  std::vector<double> x;
  OptimReport report;
};

inline double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

namespace detail {

struct LinePoint {
  double alpha = 0.0;
  double f = 0.0;
  double slope = 0.0;  // directional derivative
  std::vector<double> x, g;
};

// Minimizer of the cubic through (a, fa, da), (b, fb, db); nullopt when the
// cubic has no real minimizer.
inline std::optional<double> cubic_min(double a, double fa, double da, double b, double fb,
                                       double db) {
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  if (!(disc >= 0.0) || !std::isfinite(disc)) return std::nullopt;
  const double d2 = std::copysign(std::sqrt(disc), b - a);
  const double denom = db - da + 2.0 * d2;
  if (denom == 0.0) return std::nullopt;
  const double t = b - (b - a) * (db + d2 - d1) / denom;
  if (!std::isfinite(t)) return std::nullopt;
  return t;
}

template <typename F>
class LineSearch {
 public:
  LineSearch(F& f, const OptimConfig& cfg, std::span<const double> x0, double f0,
             std::span<const double> dir, double slope0, int& evaluations)
      : f_(f), cfg_(cfg), x0_(x0), f0_(f0), dir_(dir), slope0_(slope0), evals_(evaluations) {}

  std::optional<LinePoint> run(double alpha) {
    LinePoint prev{0.0, f0_, slope0_, {}, {}};
    for (int step = 0; step < cfg_.max_line_search_steps; ++step) {
      LinePoint cur = eval(alpha);
      if (!decreases(cur, step > 0 ? prev.f : kInf)) return zoom(std::move(prev), std::move(cur));
      if (std::abs(cur.slope) <= -cfg_.c2 * slope0_) return cur;
      if (cur.slope >= 0.0) return zoom(std::move(cur), std::move(prev));
      prev = std::move(cur);
      alpha *= 2.0;
    }
    return std::nullopt;
  }

 private:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  // Sufficient decrease and improvement over `ref`. Once f(alpha) is within
  // rounding noise of f(0) the values carry no information and only the
  // slope tests decide (approximate Wolfe conditions).
  bool decreases(const LinePoint& p, double ref) const {
    if (!std::isfinite(p.f)) return false;
    if (std::abs(p.f - f0_) <= 1e-12 * (1.0 + std::abs(f0_))) return true;
    return p.f <= f0_ + cfg_.c1 * p.alpha * slope0_ && p.f < ref;
  }

  LinePoint eval(double alpha) {
    LinePoint p;
    p.alpha = alpha;
    p.x.resize(x0_.size());
    p.g.resize(x0_.size());
    for (std::size_t i = 0; i < x0_.size(); ++i) p.x[i] = x0_[i] + alpha * dir_[i];
    p.f = f_(std::span<const double>(p.x), std::span<double>(p.g));
    ++evals_;
    p.slope = std::isfinite(p.f) ? dot(p.g, dir_) : std::numeric_limits<double>::quiet_NaN();
    return p;
  }

  // `lo` satisfies sufficient decrease with the lowest value seen so far.
  std::optional<LinePoint> zoom(LinePoint lo, LinePoint hi) {
    for (int step = 0; step < cfg_.max_line_search_steps; ++step) {
      const double a = std::min(lo.alpha, hi.alpha), b = std::max(lo.alpha, hi.alpha);
      const double width = b - a;
      if (width <= 1e-16 * std::max(1.0, b)) break;
      double alpha = 0.5 * (a + b);
      if (std::isfinite(hi.f) && std::isfinite(hi.slope)) {
        if (auto c = cubic_min(lo.alpha, lo.f, lo.slope, hi.alpha, hi.f, hi.slope);
            c && *c > a + 0.1 * width && *c < b - 0.1 * width)
          alpha = *c;
      }
      LinePoint cur = eval(alpha);
      if (!decreases(cur, lo.f)) {
        hi = std::move(cur);
      } else {
        if (std::abs(cur.slope) <= -cfg_.c2 * slope0_) return cur;
        if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = std::move(lo);
        lo = std::move(cur);
      }
    }
    // Interval collapsed: accept the best sufficient-decrease point, if any.
    if (lo.alpha > 0.0) return lo;
    return std::nullopt;
  }

  F& f_;
  const OptimConfig& cfg_;
  std::span<const double> x0_;
  double f0_;
  std::span<const double> dir_;
  double slope0_;
  int& evals_;
};

}  // namespace detail

template <typename F>
OptimResult minimize(F&& f, std::vector<double> x0, const OptimConfig& cfg = {}) {
  cfg.validate();
  const std::size_t n = x0.size();
  OptimResult res;
  auto& rep = res.report;
  std::vector<double> x = std::move(x0), g(n);
  double fx = f(std::span<const double>(x), std::span<double>(g));
  rep.evaluations = 1;
  if (!std::isfinite(fx) || !std::all_of(g.begin(), g.end(), [](double v) { return std::isfinite(v); }))
    throw ValidationError("objective is not finite at the starting point");
  rep.history.push_back(fx);

  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;
  std::vector<double> dir(n), alpha_buf;

  rep.status = OptimStatus::MaxIters;
  for (int iter = 0;; ++iter) {
    if (inf_norm(g) <= cfg.grad_tol) {
      rep.status = OptimStatus::Converged;
      break;
    }
    if (iter >= cfg.max_iters) break;

    // Two-loop recursion: dir = -H g.
    for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i];
    const std::size_t m = s_hist.size();
    alpha_buf.assign(m, 0.0);
    for (std::size_t k = m; k-- > 0;) {
      alpha_buf[k] = rho_hist[k] * dot(s_hist[k], dir);
      for (std::size_t i = 0; i < n; ++i) dir[i] -= alpha_buf[k] * y_hist[k][i];
    }
    if (m > 0) {
      const double gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
      for (auto& d : dir) d *= gamma;
    }
    for (std::size_t k = 0; k < m; ++k) {
      const double beta = rho_hist[k] * dot(y_hist[k], dir);
      for (std::size_t i = 0; i < n; ++i) dir[i] += (alpha_buf[k] - beta) * s_hist[k][i];
    }

    double slope = dot(g, dir);
    if (!(slope < 0.0)) {
      s_hist.clear(), y_hist.clear(), rho_hist.clear();
      for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i];
      slope = dot(g, dir);
    }

    auto step = detail::LineSearch<std::remove_reference_t<F>>(f, cfg, x, fx, dir, slope,
                                                                rep.evaluations)
                    .run(1.0);
    if (!step && !s_hist.empty()) {
      // Retry once along steepest descent with a fresh memory.
      s_hist.clear(), y_hist.clear(), rho_hist.clear();
      for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i];
      slope = dot(g, dir);
      step = detail::LineSearch<std::remove_reference_t<F>>(f, cfg, x, fx, dir, slope,
                                                             rep.evaluations)
                 .run(1.0);
    }
    if (!step) {
      rep.status = OptimStatus::LineSearchFailed;
      break;
    }

    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = step->x[i] - x[i];
      y[i] = step->g[i] - g[i];
    }
    const double sy = dot(s, y);
    if (sy > 1e-10 * std::sqrt(dot(s, s)) * std::sqrt(dot(y, y))) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > static_cast<std::size_t>(cfg.memory)) {
        s_hist.pop_front(), y_hist.pop_front(), rho_hist.pop_front();
      }
    }
    x = std::move(step->x);
    g = std::move(step->g);
    fx = step->f;
    rep.history.push_back(fx);
    ++rep.iterations;
  }
  rep.value = fx;
  rep.grad_norm = inf_norm(g);
  res.x = std::move(x);
  return res;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::vector<double> analytic;
  std::vector<double> numeric;
};

// Central differences per coordinate; relative error
// |g_a - g_fd| / max(1, |g_a|, |g_fd|).
template <typename F>
GradCheckResult grad_check(F&& f, std::vector<double> x, double eps = 1e-5) {
  const std::size_t n = x.size();
  GradCheckResult r;
  r.analytic.resize(n);
  r.numeric.resize(n);
  std::vector<double> scratch(n);
  f(std::span<const double>(x), std::span<double>(r.analytic));
  for (std::size_t i = 0; i < n; ++i) {
    const double orig = x[i];
    x[i] = orig + eps;
    const double fp = f(std::span<const double>(x), std::span<double>(scratch));
    x[i] = orig - eps;
    const double fm = f(std::span<const double>(x), std::span<double>(scratch));
    x[i] = orig;
    r.numeric[i] = (fp - fm) / (2.0 * eps);
    const double err = std::abs(r.analytic[i] - r.numeric[i]) /
                       std::max({1.0, std::abs(r.analytic[i]), std::abs(r.numeric[i])});
    if (err > r.max_rel_error) {
      r.max_rel_error = err;
      r.worst_index = i;
    }
  }
  return r;
}

}  // namespace chatlink
