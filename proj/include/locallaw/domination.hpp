// Copyright 2026 The locallaw-lab Authors
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

// A statistical surrogate for stochastic domination.
//
// "X is stochastically dominated by Y" is the asymptotic statement that for
// every epsilon > 0 and D > 0, sup_u P[X(u) > N^eps Y(u)] <= N^(-D) for all
// large N.  At finite N we can only gather evidence, so the verdict here is
// the deliberately weaker "consistent with domination": on an N-ladder, for
// each tested (eps, D), the estimated exceedance probability at the largest N
// must sit below N^(-D) plus the interval width, and the estimates must be
// nonincreasing along the ladder up to confidence-interval overlap.  The
// default grids stop at D = 2 because tails below N^(-2) are unobservable at
// desk-scale trial counts.
//
// Wilson score intervals are used throughout (they stay informative at
// p-hat = 0, where Wald intervals collapse).  Exponent fits are ordinary
// least squares in log-log coordinates.

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "locallaw/stats.hpp"

namespace locallaw::domination {

struct Interval {
  double phat = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  bool contains(double p) const { return p >= lo && p <= hi; }
};

// Wilson score interval for a binomial proportion; zq is the normal quantile
// (default: two-sided 95%).
inline Interval wilson_interval(long successes, long trials,
                                double zq = 1.959963984540054) {
  if (trials <= 0) throw std::invalid_argument("wilson_interval: trials must be positive");
  if (successes < 0 || successes > trials)
    throw std::invalid_argument("wilson_interval: successes outside [0, trials]");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = zq * zq;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half =
      zq * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  Interval out;
  out.phat = p;
  out.lo = std::max(0.0, center - half);
  out.hi = std::min(1.0, center + half);
  return out;
}

struct TailRow {
  int n = 0;
  double epsilon = 0.0;
  double threshold = std::numeric_limits<double>::quiet_NaN();  // NaN: pairwise X>N^eps*Y
  long exceed = 0;
  long trials = 0;
  Interval ci;
};

struct TailTable {
  std::vector<TailRow> rows;
};

struct TailEstimate {
  long exceed = 0;
  long trials = 0;
  Interval ci;
};

// Empirical exceedance frequency P[sample > threshold] with a 95% interval.
inline TailEstimate tail_probability(const std::vector<double>& samples,
                                     double threshold) {
  if (samples.size() < 30)
    throw std::invalid_argument("tail_probability: need at least 30 samples");
  TailEstimate out;
  out.trials = static_cast<long>(samples.size());
  for (double s : samples)
    if (s > threshold) ++out.exceed;
  out.ci = wilson_interval(out.exceed, out.trials);
  return out;
}

// One ladder rung: per-parameter (u), per-trial samples of X and the bound Y.
// Values are moduli (nonnegative); complex inputs take std::abs upstream.
struct SampleTable {
  int n = 0;
  std::vector<std::vector<double>> x;  // x[u][trial]
  std::vector<std::vector<double>> y;  // y[u][trial], matched shape
};

struct DominationQuery {
  std::string family;
  std::vector<SampleTable> ladder;  // ascending n
  std::vector<double> epsilon_grid{0.05, 0.1, 0.2, 0.4};
  std::vector<double> d_grid{1.0, 2.0};
};

struct CellVerdict {
  double epsilon = 0.0;
  double d = 0.0;
  bool gate_pass = false;      // largest N: phat <= N^(-D) + interval width
  bool monotone_pass = false;  // phat nonincreasing up to CI overlap
  std::vector<TailRow> rows;   // per rung, sup over u already taken
  bool pass() const { return gate_pass && monotone_pass; }
};

struct DominationVerdict {
  std::vector<CellVerdict> cells;
  bool consistent = false;  // every epsilon passes at some tested D
};

namespace detail {

inline void validate_query(const DominationQuery& q) {
  if (q.ladder.empty()) throw std::invalid_argument("domination_verdict: empty ladder");
  if (q.ladder.size() < 3)
    throw std::invalid_argument("domination_verdict: ladder needs >= 3 sizes");
  if (q.epsilon_grid.empty() || q.d_grid.empty())
    throw std::invalid_argument("domination_verdict: empty parameter grid");
  for (const SampleTable& t : q.ladder) {
    if (t.n <= 0) throw std::invalid_argument("domination_verdict: nonpositive N");
    if (t.x.empty() || t.x.size() != t.y.size())
      throw std::invalid_argument("domination_verdict: mismatched sample tables");
    for (size_t u = 0; u < t.x.size(); ++u) {
      if (t.x[u].empty() || t.x[u].size() != t.y[u].size())
        throw std::invalid_argument("domination_verdict: mismatched trial counts");
      for (double v : t.x[u])
        if (!(v >= 0.0)) throw std::invalid_argument("domination_verdict: negative X sample");
      for (double v : t.y[u])
        if (!(v >= 0.0)) throw std::invalid_argument("domination_verdict: negative Y sample");
    }
  }
}

// Exceedance at one rung for one epsilon: sup over u of the per-u frequency.
inline TailRow rung_tail(const SampleTable& t, double eps) {
  TailRow row;
  row.n = t.n;
  row.epsilon = eps;
  const double factor = std::pow(static_cast<double>(t.n), eps);
  long worst = 0;
  long trials = 0;
  for (size_t u = 0; u < t.x.size(); ++u) {
    long count = 0;
    for (size_t k = 0; k < t.x[u].size(); ++k)
      if (t.x[u][k] > factor * t.y[u][k]) ++count;
    if (u == 0 || count > worst) {
      worst = count;
      trials = static_cast<long>(t.x[u].size());
    }
  }
  row.exceed = worst;
  row.trials = trials;
  row.ci = wilson_interval(worst, trials);
  return row;
}

}  // namespace detail

inline DominationVerdict domination_verdict(const DominationQuery& q) {
  detail::validate_query(q);
  DominationVerdict out;
  out.consistent = true;
  for (double eps : q.epsilon_grid) {
    std::vector<TailRow> rows;
    rows.reserve(q.ladder.size());
    for (const SampleTable& t : q.ladder) rows.push_back(detail::rung_tail(t, eps));
    bool monotone = true;
    for (size_t j = 0; j + 1 < rows.size(); ++j)
      if (rows[j + 1].ci.lo > rows[j].ci.hi) monotone = false;
    bool eps_pass = false;
    for (double d : q.d_grid) {
      CellVerdict cell;
      cell.epsilon = eps;
      cell.d = d;
      cell.rows = rows;
      cell.monotone_pass = monotone;
      const TailRow& last = rows.back();
      const double budget =
          std::pow(static_cast<double>(last.n), -d) + last.ci.width();
      cell.gate_pass = last.ci.phat <= budget;
      eps_pass = eps_pass || cell.pass();
      out.cells.push_back(cell);
    }
    out.consistent = out.consistent && eps_pass;
  }
  return out;
}

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;  // in log(metric) = slope*log(N) + intercept
  double max_residual = 0.0;
  std::vector<int> ladder;
};

// Least-squares exponent: fit log(metric) against log(N).
inline SlopeFit exponent_fit(const std::vector<int>& ns,
                             const std::vector<double>& metrics) {
  if (ns.size() != metrics.size() || ns.size() < 3)
    throw std::invalid_argument("exponent_fit: need >= 3 matched ladder points");
  std::vector<double> xs, ys;
  xs.reserve(ns.size());
  ys.reserve(ns.size());
  for (size_t k = 0; k < ns.size(); ++k) {
    if (ns[k] <= 0) throw std::invalid_argument("exponent_fit: nonpositive N");
    if (!(metrics[k] > 0.0))
      throw std::invalid_argument("exponent_fit: nonpositive metric");
    xs.push_back(std::log(static_cast<double>(ns[k])));
    ys.push_back(std::log(metrics[k]));
  }
  const stats::LineFit line = stats::least_squares_line(xs, ys);
  SlopeFit fit;
  fit.slope = line.slope;
  fit.intercept = line.intercept;
  fit.ladder = ns;
  for (size_t k = 0; k < xs.size(); ++k)
    fit.max_residual = std::max(
        fit.max_residual, std::abs(ys[k] - line.slope * xs[k] - line.intercept));
  return fit;
}

}  // namespace locallaw::domination
