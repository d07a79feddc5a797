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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "locallaw/domination.hpp"

namespace dom = locallaw::domination;

namespace {

// Rung with constant X and Y values across u slots and trials.
dom::SampleTable constant_table(int n, int u_count, int trials, double xv, double yv) {
  dom::SampleTable t;
  t.n = n;
  t.x.assign(u_count, std::vector<double>(trials, xv));
  t.y.assign(u_count, std::vector<double>(trials, yv));
  return t;
}

}  // namespace

TEST_CASE("wilson intervals at the boundary and center") {
  const auto zero = dom::wilson_interval(0, 100);
  REQUIRE(zero.phat == 0.0);
  REQUIRE(zero.lo < 1e-12);  // center - half cancels only up to rounding
  REQUIRE(std::abs(zero.hi - 0.0369940) < 1e-6);  // stays informative at 0

  const auto half = dom::wilson_interval(50, 100);
  REQUIRE(half.phat == 0.5);
  REQUIRE(std::abs(half.lo + half.hi - 1.0) < 1e-12);  // symmetric about 1/2
  REQUIRE(std::abs(half.lo - 0.403832) < 1e-5);
  REQUIRE(half.contains(0.5));
  REQUIRE_FALSE(half.contains(0.7));

  REQUIRE_THROWS_AS(dom::wilson_interval(0, 0), std::invalid_argument);
  REQUIRE_THROWS_AS(dom::wilson_interval(-1, 10), std::invalid_argument);
  REQUIRE_THROWS_AS(dom::wilson_interval(11, 10), std::invalid_argument);
}

TEST_CASE("tail probabilities") {
  const std::vector<double> zeros(100, 0.0);
  REQUIRE(dom::tail_probability(zeros, 0.0).exceed == 0);  // strict inequality

  std::vector<double> mixed;
  for (int k = 0; k < 100; ++k) mixed.push_back(k % 2 == 0 ? 0.0 : 1.0);
  const auto est = dom::tail_probability(mixed, 0.5);
  REQUIRE(est.exceed == 50);
  REQUIRE(est.trials == 100);
  REQUIRE(est.ci.phat == 0.5);

  // Exceedance is nonincreasing in the threshold.
  std::vector<double> ramp;
  for (int k = 0; k < 60; ++k) ramp.push_back(0.1 * k);
  long prev = 61;
  for (double thr : {0.0, 1.0, 2.0, 4.0, 6.0}) {
    const long e = dom::tail_probability(ramp, thr).exceed;
    REQUIRE(e <= prev);
    prev = e;
  }

  REQUIRE_THROWS_AS(dom::tail_probability(std::vector<double>(29, 0.0), 0.5),
                    std::invalid_argument);
}

TEST_CASE("identically zero X is consistent with domination") {
  dom::DominationQuery q;
  q.family = "x-zero";
  for (int n : {8, 16, 32}) q.ladder.push_back(constant_table(n, 2, 40, 0.0, 1.0));
  const auto v = dom::domination_verdict(q);
  REQUIRE(v.consistent);
  REQUIRE(v.cells.size() == q.epsilon_grid.size() * q.d_grid.size());
  for (const auto& cell : v.cells) {
    REQUIRE(cell.gate_pass);
    REQUIRE(cell.monotone_pass);
    REQUIRE(cell.rows.size() == 3);
    for (const auto& row : cell.rows) REQUIRE(row.exceed == 0);
  }
}

TEST_CASE("a constant factor is harmless once N^eps clears it") {
  dom::DominationQuery q;
  q.family = "x-twice-y";
  q.epsilon_grid = {0.5, 1.0};  // 8^0.5 > 2 already covers the factor
  q.d_grid = {1.0};
  for (int n : {8, 16, 32}) q.ladder.push_back(constant_table(n, 2, 40, 2.0, 1.0));
  REQUIRE(dom::domination_verdict(q).consistent);

  // At eps = 0.05 the slack N^eps never reaches 2 on this ladder, so the
  // same data fail the default grid: the surrogate is eps-resolved.
  dom::DominationQuery strict = q;
  strict.epsilon_grid = {0.05};
  strict.d_grid = {1.0, 2.0};
  const auto v = dom::domination_verdict(strict);
  REQUIRE_FALSE(v.consistent);
  for (const auto& cell : v.cells) REQUIRE(cell.rows.back().exceed == 40);
}

TEST_CASE("X growing like N times Y is rejected") {
  dom::DominationQuery q;
  q.family = "x-n-times-y";
  for (int n : {8, 16, 32})
    q.ladder.push_back(constant_table(n, 2, 40, static_cast<double>(n), 1.0));
  const auto v = dom::domination_verdict(q);
  REQUIRE_FALSE(v.consistent);
  for (const auto& cell : v.cells) REQUIRE_FALSE(cell.gate_pass);
}

TEST_CASE("the verdict is invariant under joint rescaling") {
  dom::DominationQuery q;
  q.epsilon_grid = {0.5, 1.0};
  for (int n : {8, 16, 32}) q.ladder.push_back(constant_table(n, 2, 40, 2.0, 1.0));
  dom::DominationQuery scaled = q;
  for (auto& t : scaled.ladder) {
    for (auto& row : t.x)
      for (double& v : row) v *= 2.0;
    for (auto& row : t.y)
      for (double& v : row) v *= 2.0;
  }
  const auto v1 = dom::domination_verdict(q);
  const auto v2 = dom::domination_verdict(scaled);
  REQUIRE(v1.consistent == v2.consistent);
  REQUIRE(v1.cells.size() == v2.cells.size());
  for (size_t c = 0; c < v1.cells.size(); ++c) {
    REQUIRE(v1.cells[c].pass() == v2.cells[c].pass());
    for (size_t r = 0; r < v1.cells[c].rows.size(); ++r)
      REQUIRE(v1.cells[c].rows[r].exceed == v2.cells[c].rows[r].exceed);
  }
}

TEST_CASE("query validation") {
  dom::DominationQuery q;
  for (int n : {8, 16}) q.ladder.push_back(constant_table(n, 2, 40, 0.0, 1.0));
  REQUIRE_THROWS_AS(dom::domination_verdict(q), std::invalid_argument);  // < 3 rungs

  q.ladder.push_back(constant_table(32, 2, 40, 0.0, 1.0));
  dom::DominationQuery bad = q;
  bad.ladder[1].x[0][3] = -1.0;
  REQUIRE_THROWS_AS(dom::domination_verdict(bad), std::invalid_argument);

  bad = q;
  bad.ladder[2].y[1].pop_back();
  REQUIRE_THROWS_AS(dom::domination_verdict(bad), std::invalid_argument);

  bad = q;
  bad.epsilon_grid.clear();
  REQUIRE_THROWS_AS(dom::domination_verdict(bad), std::invalid_argument);
}

TEST_CASE("exponent fits recover planted power laws") {
  const std::vector<int> ns{64, 128, 256, 512};
  std::vector<double> ys;
  for (int n : ns) ys.push_back(3.0 / std::sqrt(static_cast<double>(n)));
  const auto fit = dom::exponent_fit(ns, ys);
  REQUIRE(std::abs(fit.slope + 0.5) < 1e-12);
  REQUIRE(std::abs(fit.intercept - std::log(3.0)) < 1e-12);
  REQUIRE(fit.max_residual < 1e-12);
  REQUIRE(fit.ladder == ns);

  const auto flat = dom::exponent_fit(ns, std::vector<double>(4, 0.7));
  REQUIRE(std::abs(flat.slope) < 1e-14);

  // Refits of identical data are bitwise identical.
  const auto again = dom::exponent_fit(ns, ys);
  REQUIRE(again.slope == fit.slope);
  REQUIRE(again.intercept == fit.intercept);

  REQUIRE_THROWS_AS(dom::exponent_fit({64, 128}, {1.0, 0.5}), std::invalid_argument);
  REQUIRE_THROWS_AS(dom::exponent_fit(ns, {1.0, 0.5, 0.2}), std::invalid_argument);
  REQUIRE_THROWS_AS(dom::exponent_fit(ns, {1.0, 0.5, 0.0, 0.1}), std::invalid_argument);
  REQUIRE_THROWS_AS(dom::exponent_fit({64, 128, -1, 512}, ys), std::invalid_argument);
}
