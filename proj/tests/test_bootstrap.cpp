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
#include <complex>
#include <vector>

#include "locallaw/bootstrap.hpp"
#include "locallaw/ensemble.hpp"
#include "locallaw/semicircle.hpp"
#include "locallaw/spectral.hpp"

namespace bs = locallaw::bootstrap;
namespace ens = locallaw::ensemble;
namespace sp = locallaw::spectral;
namespace sc = locallaw::semicircle;
using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

namespace {

ens::EnsembleSpec make_spec(int n, std::uint64_t seed = 7) {
  ens::EnsembleSpec s;
  s.n = n;
  s.master_seed = seed;
  return s;
}

}  // namespace

TEST_CASE("ladder construction") {
  // gamma = 1, delta = 0.3: K = floor(1/0.3) = 3, and eta_3 = N^0.1 is the
  // last level at or above N^(-1+gamma) = 1.
  const auto lad = bs::build_ladder(128, 0.0, 1.0, 0.3);
  REQUIRE(lad.k_max == 3);
  REQUIRE(lad.size() == 4);
  REQUIRE(lad.eta(0) == 128.0);
  REQUIRE(lad.eta(3) >= 1.0);
  REQUIRE(lad.exponent(3) > 0.0);
  for (int k = 0; k < lad.k_max; ++k) {
    const double ratio = lad.eta(k + 1) / lad.eta(k);
    REQUIRE(std::abs(ratio - std::pow(128.0, -0.3)) < 1e-12);
    REQUIRE(lad.point(k).eta == lad.eta(k));
  }

  // Exact-tie division: (2 - 0.5)/0.15 = 10 must not round down to 9.
  REQUIRE(bs::build_ladder(64, 0.0, 0.5, 0.15).k_max == 10);
  REQUIRE(std::abs(bs::build_ladder(64, 0.0, 0.5, 0.15).exponent(10) + 0.5) < 1e-12);

  REQUIRE_THROWS_AS(bs::build_ladder(1, 0.0, 0.5, 0.15), std::invalid_argument);
  REQUIRE_THROWS_AS(bs::build_ladder(64, 0.0, 1.5, 0.15), std::invalid_argument);
  REQUIRE_THROWS_AS(bs::build_ladder(64, 0.0, 0.5, 0.2), std::invalid_argument);
  REQUIRE_THROWS_AS(bs::build_ladder(64, 0.0, 0.5, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(bs::build_ladder(64, 100.0, 0.5, 0.15), std::invalid_argument);
}

TEST_CASE("propagation inequality on the zero matrix is tight") {
  const auto dec = sp::decompose(Matrix::Zero(8, 8));
  // Gamma(eta) = 1/eta here, so Gamma(eta/M) = M Gamma(eta) exactly.
  const auto res = bs::propagation_check(dec, 0.0, 0.5, 2.0);
  REQUIRE(res.ratio == 1.0);
  REQUIRE(res.pass);
  REQUIRE_THROWS_AS(bs::propagation_check(dec, 0.0, 0.5, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(bs::propagation_check(dec, 0.0, 0.0, 2.0), std::invalid_argument);
}

TEST_CASE("propagation inequality never fails on sampled matrices") {
  const auto w = ens::sample_wigner(make_spec(64), 0);
  const auto dec = sp::decompose(w.h);
  for (int k = 0; k < 100; ++k) {
    const double u = (k + 0.5) / 100.0;
    const double eta = std::pow(10.0, -2.0 + 3.0 * u);
    const double m = 1.0 + 9.0 * u;
    const auto res = bs::propagation_check(dec, 0.3, eta, m);
    INFO("eta " << eta << " M " << m << " ratio " << res.ratio);
    REQUIRE(res.pass);
    REQUIRE(res.ratio <= 1.0 + 1e-10);
  }
  // M barely above 1 still satisfies the inequality.
  REQUIRE(bs::propagation_check(dec, 0.0, 0.1, 1.000001).pass);
}

TEST_CASE("shared-anchor gamma star equals standalone evaluations bit for bit") {
  const auto w = ens::sample_wigner(make_spec(32), 1);
  const auto dec = sp::decompose(w.h);
  const auto lad = bs::build_ladder(32, 0.3, 1.0, 0.3);
  const auto stars = bs::ladder_gamma_star(dec, lad, 1.05);
  REQUIRE(stars.size() == static_cast<size_t>(lad.size()));
  for (int k = 0; k < lad.size(); ++k) {
    const auto ref = sp::gamma_star(dec, 0.3, lad.eta(k), lad.eta(0), 1.05);
    REQUIRE(stars[k].grid_sup == ref.grid_sup);
    REQUIRE(stars[k].slack == ref.slack);
    REQUIRE(stars[k].points == ref.points);
  }
  REQUIRE_THROWS_AS(bs::ladder_gamma_star(dec, lad, 1.0), std::invalid_argument);
}

TEST_CASE("trial data are deterministic and fold reproducibly") {
  const auto spec = make_spec(32);
  const auto lad = bs::build_ladder(32, 0.0, 1.0, 0.3);
  const auto d1 = bs::bootstrap_trial(spec, lad, 1.05, 4);
  const auto d2 = bs::bootstrap_trial(spec, lad, 1.05, 4);
  REQUIRE(d1.sup == d2.sup);
  REQUIRE(d1.certified == d2.certified);
  REQUIRE(d1.diag == d2.diag);
  REQUIRE(d1.offd == d2.offd);

  // The wrapper equals sample + decompose + bootstrap_trial_from.
  const auto w = ens::sample_wigner(spec, 4);
  const auto d3 = bs::bootstrap_trial_from(sp::decompose(w.h), lad, 1.05);
  REQUIRE(d1.sup == d3.sup);
  REQUIRE(d1.diag == d3.diag);

  const auto t1 = bs::fold_bootstrap(spec, 0.0, 1.0, 0.3, 3.0, 1.05, {d1, d3});
  const auto t2 = bs::fold_bootstrap(spec, 0.0, 1.0, 0.3, 3.0, 1.05, {d1, d3});
  REQUIRE(t1.levels.size() == t2.levels.size());
  for (size_t k = 0; k < t1.levels.size(); ++k) {
    REQUIRE(t1.levels[k].gamma_sup_median == t2.levels[k].gamma_sup_median);
    REQUIRE(t1.levels[k].diag_p95 == t2.levels[k].diag_p95);
  }

  REQUIRE_THROWS_AS(bs::fold_bootstrap(spec, 0.0, 1.0, 0.3, 3.0, 1.05, {}),
                    std::invalid_argument);
  bs::BootstrapTrialData short_data = d1;
  short_data.sup.pop_back();
  REQUIRE_THROWS_AS(
      bs::fold_bootstrap(spec, 0.0, 1.0, 0.3, 3.0, 1.05, {short_data}),
      std::invalid_argument);
}

TEST_CASE("bootstrap descent keeps every gate clean at a comfortable size") {
  const auto spec = make_spec(64);
  const auto trace = bs::run_bootstrap(spec, 0.0, 1.0, 0.3, 20);
  REQUIRE(trace.k_max == 3);
  REQUIRE(trace.levels.size() == 4);
  REQUIRE(trace.levels[0].eta == 64.0);
  REQUIRE(trace.levels[0].cap_exceed == 0);  // the induction seed
  REQUIRE(trace.max_exceed_frequency() == 0.0);
  REQUIRE(trace.offdiag_monotone);  // off-diagonals grow as eta shrinks
  for (const auto& lv : trace.levels) {
    REQUIRE(lv.trials == 20);
    REQUIRE(lv.gamma_sup_median >= 1.0);  // Gamma is floored at 1
    REQUIRE(lv.certified_median >= lv.gamma_sup_median);
    if (lv.k > 0) {
      const double sqrt_neta = std::sqrt(64.0 * lv.eta);
      REQUIRE(std::abs(lv.r_raw - std::pow(64.0, 1.5) / sqrt_neta) <
              1e-12 * lv.r_raw);
      REQUIRE(std::abs(lv.offdiag_bound - std::pow(64.0, 0.75) / sqrt_neta) <
              1e-12 * lv.offdiag_bound);
      const Complex z(0.0, lv.eta);
      REQUIRE(lv.diag_bound ==
              sc::f_stability(z, std::min(1.0, lv.r_raw)) * std::pow(64.0, 0.3));
      REQUIRE(lv.diag_exceed == 0);
      REQUIRE(lv.offdiag_exceed == 0);
      REQUIRE(lv.step_exceed == 0);
    }
  }
  REQUIRE_THROWS_AS(bs::run_bootstrap(spec, 0.0, 1.0, 0.3, 0), std::invalid_argument);
  REQUIRE_THROWS_AS(bs::run_bootstrap(spec, 0.0, 1.0, 0.3, 5, 0.0),
                    std::invalid_argument);
}

TEST_CASE("single sweep observations at the trivial scale") {
  const auto spec = make_spec(32);
  const auto tm = bs::sweep_one(spec, 0, 0.0, 32.0);
  REQUIRE(tm.n == 32);
  REQUIRE(tm.eta == 32.0);
  // At eta = N every entry of G is at most 1/N and m is about as small.
  REQUIRE(tm.diag_err < 0.07);
  REQUIRE(tm.offdiag_max < 0.05);
  REQUIRE(tm.residual < 0.1);
  const Complex m = sc::stieltjes(Complex(0.0, 32.0));
  REQUIRE(std::abs(tm.s_minus_m - std::abs(tm.s - m)) < 1e-15);
}

TEST_CASE("the sweep fold recovers planted power laws") {
  std::vector<bs::TrialMetrics> samples;
  for (int n : {64, 128, 256}) {
    const double eta = std::pow(static_cast<double>(n), -0.5);
    for (int t = 0; t < 3; ++t) {
      bs::TrialMetrics tm;
      tm.n = n;
      tm.trial = static_cast<std::uint64_t>(t);
      tm.e = 0.0;
      tm.eta = eta;
      tm.diag_err = 2.0 * std::pow(static_cast<double>(n), -0.25);
      tm.offdiag_max = 3.0 * std::pow(static_cast<double>(n), -0.5);
      tm.residual = 0.2 * std::pow(static_cast<double>(n), -0.5);
      tm.s = sc::stieltjes(Complex(0.0, eta));
      tm.s_minus_m = 0.0;
      samples.push_back(tm);
    }
  }
  const auto res = bs::aggregate_sweep(samples, 0.5);
  REQUIRE(res.cells.size() == 3);
  REQUIRE(res.slopes_available);
  REQUIRE(std::abs(res.diag_slope.slope + 0.25) < 1e-10);
  REQUIRE(std::abs(res.offdiag_slope.slope + 0.5) < 1e-10);
  REQUIRE(std::abs(res.residual_slope.slope + 0.5) < 1e-10);
  for (const auto& cell : res.cells) {
    REQUIRE(cell.trials == 3);
    REQUIRE(std::abs(cell.psi_ref - std::pow(static_cast<double>(cell.n), -0.25)) <
            1e-14);
    REQUIRE(cell.envelope_pass);  // planted residuals sit far below 10 psi
  }
  // The planted s equals m up to evaluation noise: an r > 0 record set with
  // a negligible fitted constant and clean data-quality flags.
  REQUIRE(res.stability.fitted_c < 1e-9);
  REQUIRE(res.stability.precondition_flags == 0);
  REQUIRE(res.stability.eta_direction_violations == 0);

  // Aggregation sorts internally: a reversed sample feed folds identically.
  std::vector<bs::TrialMetrics> reversed(samples.rbegin(), samples.rend());
  const auto res2 = bs::aggregate_sweep(reversed, 0.5);
  REQUIRE(res2.cells.size() == res.cells.size());
  for (size_t c = 0; c < res.cells.size(); ++c) {
    REQUIRE(res2.cells[c].diag_median == res.cells[c].diag_median);
    REQUIRE(res2.cells[c].residual_p95 == res.cells[c].residual_p95);
  }
  REQUIRE(res2.stability.fitted_c == res.stability.fitted_c);

  // Two E values: cells split, slope fits are withheld.
  std::vector<bs::TrialMetrics> two_e = samples;
  for (auto tm : samples) {
    tm.e = 0.5;
    two_e.push_back(tm);
  }
  const auto res3 = bs::aggregate_sweep(two_e, 0.5);
  REQUIRE(res3.cells.size() == 6);
  REQUIRE_FALSE(res3.slopes_available);

  REQUIRE_THROWS_AS(bs::aggregate_sweep({}, 0.5), std::invalid_argument);
}

TEST_CASE("the serial sweep driver validates input and produces cells") {
  const auto spec = make_spec(8);
  const auto res = bs::local_law_sweep(spec, {16, 32, 64}, {0.0}, 0.5, 4);
  REQUIRE(res.cells.size() == 3);
  REQUIRE(res.slopes_available);
  for (const auto& cell : res.cells)
    REQUIRE(std::abs(cell.eta - std::pow(static_cast<double>(cell.n), -0.5)) < 1e-12);
  REQUIRE_THROWS_AS(bs::local_law_sweep(spec, {}, {0.0}, 0.5, 4),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(bs::local_law_sweep(spec, {16, 32, 64}, {0.0}, 0.5, 0),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(bs::local_law_sweep(spec, {16, 32, 64}, {20.0}, 0.5, 4),
                    std::invalid_argument);
}
