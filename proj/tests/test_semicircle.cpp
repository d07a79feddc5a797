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
#include <limits>
#include <numbers>
#include <vector>

#include "locallaw/semicircle.hpp"

namespace sc = locallaw::semicircle;
using Complex = std::complex<double>;

TEST_CASE("density hand values and shape") {
  REQUIRE(sc::density(0.0) == 1.0 / std::numbers::pi);
  REQUIRE(sc::density(2.0) == 0.0);
  REQUIRE(sc::density(-2.0) == 0.0);
  REQUIRE(sc::density(3.5) == 0.0);
  for (double x = 0.0; x <= 2.0; x += 0.125) {
    REQUIRE(sc::density(x) == sc::density(-x));
    REQUIRE(sc::density(x) <= sc::density(0.0));
  }
}

TEST_CASE("cdf endpoints, monotonicity, derivative") {
  REQUIRE(sc::cdf(-2.0) == 0.0);
  REQUIRE(sc::cdf(2.0) == 1.0);
  REQUIRE(sc::cdf(-5.0) == 0.0);
  REQUIRE(sc::cdf(5.0) == 1.0);
  REQUIRE(sc::cdf(0.0) == 0.5);
  double prev = -1.0;
  for (double x = -2.5; x <= 2.5; x += 0.05) {
    const double c = sc::cdf(x);
    REQUIRE(c >= prev);
    prev = c;
  }
  // The centered difference quotient of the cdf reproduces the density.
  const double h = 1e-6;
  for (double x : {-1.5, -0.7, 0.0, 0.4, 1.8}) {
    const double fd = (sc::cdf(x + h) - sc::cdf(x - h)) / (2.0 * h);
    REQUIRE(std::abs(fd - sc::density(x)) < 1e-8);
  }
}

TEST_CASE("stieltjes transform closed form") {
  // m(i) = i (sqrt 5 - 1) / 2: the defining quadratic at z = i reads
  // m^2 + i m + 1 = 0 with the upper-half-plane root purely imaginary.
  const Complex mi = sc::stieltjes(Complex(0.0, 1.0));
  REQUIRE(std::abs(mi - Complex(0.0, (std::sqrt(5.0) - 1.0) / 2.0)) < 1e-14);

  for (double e : {-3.0, -1.0, 0.0, 0.5, 2.0, 3.0}) {
    for (double eta : {0.01, 0.1, 1.0, 10.0}) {
      const Complex z(e, eta);
      const Complex m = sc::stieltjes(z);
      REQUIRE(m.imag() > 0.0);
      // z + m + 1/m = 0 is equivalent to the defining quadratic.
      REQUIRE(std::abs(z + m + 1.0 / m) < 1e-12);
      REQUIRE(std::abs(sc::quadratic_residual(m, z)) < 1e-13 * (1.0 + std::abs(z)));
    }
  }
  REQUIRE_THROWS_AS(sc::stieltjes(Complex(1.0, 0.0)), std::invalid_argument);
  REQUIRE_THROWS_AS(sc::stieltjes(Complex(1.0, -0.1)), std::invalid_argument);
}

TEST_CASE("quadrature route agrees with the closed form") {
  for (double e : {-3.0, -1.0, 0.0, 1.5, 3.0}) {
    for (double eta : {0.05, 0.3, 1.0, 10.0}) {
      const Complex z(e, eta);
      REQUIRE(std::abs(sc::stieltjes_quadrature(z) - sc::stieltjes(z)) < 1e-8);
    }
  }
  // Far from the support a small rule already converges.
  const Complex far(0.0, 2.0);
  REQUIRE(std::abs(sc::stieltjes_quadrature(far, 128) - sc::stieltjes(far)) < 1e-10);
  REQUIRE_THROWS_AS(sc::stieltjes_quadrature(far, 32), std::invalid_argument);
  REQUIRE_THROWS_AS(sc::stieltjes_quadrature(Complex(0.0, -1.0)), std::invalid_argument);
}

TEST_CASE("gauss-legendre rules integrate low-degree polynomials exactly") {
  const auto& rule = sc::detail::gauss_legendre(6);
  double w_sum = 0.0, x2 = 0.0, x4 = 0.0;
  for (int k = 0; k < 6; ++k) {
    w_sum += rule.weights[k];
    x2 += rule.weights[k] * rule.nodes[k] * rule.nodes[k];
    x4 += rule.weights[k] * std::pow(rule.nodes[k], 4);
    REQUIRE(std::abs(rule.nodes[k] + rule.nodes[5 - k]) < 1e-14);
  }
  REQUIRE(std::abs(w_sum - 2.0) < 1e-14);
  REQUIRE(std::abs(x2 - 2.0 / 3.0) < 1e-14);
  REQUIRE(std::abs(x4 - 2.0 / 5.0) < 1e-14);
}

TEST_CASE("psi scale") {
  REQUIRE(sc::psi(100, 0.01) == 1.0);
  REQUIRE(std::abs(sc::psi(400, 1.0) - 0.05) < 1e-16);
}

TEST_CASE("stability modulus") {
  const Complex zi(0.0, 1.0);  // |z^2 - 4| = 5
  REQUIRE(sc::f_stability(zi, 1.0) == 1.0);  // sqrt branch wins at r = 1
  REQUIRE(std::abs(sc::f_stability(zi, 0.01) - 0.01 * (1.0 + 1.0 / std::sqrt(5.0))) <
          1e-16);
  double prev = -1.0;
  for (double r = 0.0; r <= 1.0; r += 0.02) {
    const double f = sc::f_stability(zi, r);
    REQUIRE(f >= prev);
    prev = f;
  }
  REQUIRE_THROWS_AS(sc::f_stability(zi, -0.1), std::invalid_argument);
  REQUIRE_THROWS_AS(sc::f_stability(zi, 1.1), std::invalid_argument);
  // At a spectral edge the linear branch degenerates; only sqrt(r) remains.
  REQUIRE(sc::f_stability(Complex(2.0, 0.0), 0.25) == 0.5);
}

TEST_CASE("stability fit recovers a planted constant") {
  const Complex z(0.0, 1.0);
  const Complex m = sc::stieltjes(z);
  std::vector<sc::StabilityRecord> recs;
  for (double r : {1e-4, 1e-3, 1e-2}) {
    const double f = sc::f_stability(z, r);
    recs.push_back({z, m + Complex(0.37 * f, 0.0), r});
  }
  const auto rep = sc::stability_check(recs);
  REQUIRE(std::abs(rep.fitted_c - 0.37) < 1e-12);
  REQUIRE(rep.pass);
  REQUIRE(rep.precondition_flags == 0);
  REQUIRE(rep.eta_direction_violations == 0);
  REQUIRE(rep.ratios.size() == 3);
}

TEST_CASE("stability fit on self-consistent data is negligible") {
  // s and the internal m may differ by an ulp (contraction varies between
  // inline sites), so feed a tiny positive r rather than demanding err == 0.
  const Complex z(0.3, 0.5);
  const auto rep = sc::stability_check({{z, sc::stieltjes(z), 1e-6}});
  REQUIRE(rep.fitted_c < 1e-9);
  REQUIRE(rep.pass);
}

TEST_CASE("zero modulus with nonzero error yields an infinite ratio") {
  const Complex z(0.0, 1.0);
  const auto rep = sc::stability_check({{z, sc::stieltjes(z) + Complex(1e-3, 0.0), 0.0}});
  REQUIRE(std::isinf(rep.fitted_c));
  REQUIRE_FALSE(rep.pass);
  REQUIRE(rep.precondition_flags == 1);  // |residual| > (1+|z|) * 0
}

TEST_CASE("residual precondition is flagged") {
  const Complex z(0.0, 1.0);
  // s is far from m while r claims a tiny residual scale.
  const auto rep = sc::stability_check({{z, sc::stieltjes(z) + Complex(0.1, 0.0), 1e-10}});
  REQUIRE(rep.precondition_flags == 1);
}

TEST_CASE("eta direction report counts decreases along increasing r") {
  const Complex m2 = sc::stieltjes(Complex(0.0, 2.0));
  const Complex m1 = sc::stieltjes(Complex(0.0, 1.0));
  // Smaller r at larger eta, larger r at smaller eta: one decrease.
  const auto bad = sc::stability_check(
      {{Complex(0.0, 2.0), m2, 0.1}, {Complex(0.0, 1.0), m1, 0.2}});
  REQUIRE(bad.eta_direction_violations == 1);
  // Matching order: no decrease.
  const auto good = sc::stability_check(
      {{Complex(0.0, 1.0), m1, 0.1}, {Complex(0.0, 2.0), m2, 0.2}});
  REQUIRE(good.eta_direction_violations == 0);
}

TEST_CASE("stability check rejects empty input") {
  REQUIRE_THROWS_AS(sc::stability_check({}), std::invalid_argument);
}
