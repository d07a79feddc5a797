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

// Semicircle law oracles.
//
// rho(x) = (1/2pi) sqrt((4 - x^2)+) on [-2, 2]; its Stieltjes transform
// m(z) = int rho(dx)/(x - z) is the unique root of m^2 + z m + 1 = 0 mapping
// the upper half-plane to itself.  Two independent evaluation routes are
// provided -- the closed form and adaptive-free Gauss-Legendre quadrature
// after the substitution x = 2 sin(theta), which removes the square-root
// endpoint singularities and makes the integrand analytic in a strip --
// so each can serve as the other's oracle.
//
// F_z(r) = min((1 + 1/sqrt|z^2-4|) r, sqrt r) is the stability modulus of
// the defining quadratic: when an approximate Stieltjes transform s leaves
// residual R = s^2 + z s + 1 of size (1+|z|) r, the distance |s - m| is
// O(F_z(r)).  stability_check fits the empirical constant in that O().

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace locallaw::semicircle {

using Complex = std::complex<double>;

inline double density(double x) {
  const double t = 4.0 - x * x;
  return t <= 0.0 ? 0.0 : std::sqrt(t) / (2.0 * std::numbers::pi);
}

// Cumulative distribution of rho; antiderivative is
// 1/2 + x sqrt(4-x^2)/(4 pi) + asin(x/2)/pi.
inline double cdf(double x) {
  if (x <= -2.0) return 0.0;
  if (x >= 2.0) return 1.0;
  return 0.5 + x * std::sqrt(4.0 - x * x) / (4.0 * std::numbers::pi) +
         std::asin(0.5 * x) / std::numbers::pi;
}

// Closed-form m(z) for Im z > 0.  The branch sqrt(z-2) sqrt(z+2) (principal
// branch per factor) has its cut only on [-2,2] and behaves like z at
// infinity, which selects the root with Im m > 0 and m -> -1/z.
inline Complex stieltjes(Complex z) {
  if (!(z.imag() > 0.0))
    throw std::invalid_argument("stieltjes: Im z must be positive");
  const Complex root = std::sqrt(z - 2.0) * std::sqrt(z + 2.0);
  Complex m = 0.5 * (-z + root);
  if (m.imag() <= 0.0) m = 0.5 * (-z - root);  // defensive; not expected
  return m;
}

namespace detail {

struct GaussLegendreRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

// Nodes by Newton iteration on P_n (standard Golub-free construction);
// cached per node count.
inline const GaussLegendreRule& gauss_legendre(int n) {
  static std::map<int, GaussLegendreRule> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  GaussLegendreRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int k = 0; k < half; ++k) {
    // Tricomi initial guess for the k-th root (descending order).
    double x = std::cos(std::numbers::pi * (k + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // Evaluate P_n(x) and P'_n(x) by the three-term recurrence.
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    rule.nodes[k] = -x;
    rule.nodes[n - 1 - k] = x;
    const double w = 2.0 / ((1.0 - x * x) * pp * pp);
    rule.weights[k] = w;
    rule.weights[n - 1 - k] = w;
  }
  auto [pos, inserted] = cache.emplace(n, std::move(rule));
  (void)inserted;
  return pos->second;
}

}  // namespace detail

// Quadrature route for m(z): after x = 2 sin(theta),
//   m(z) = int_{-pi/2}^{pi/2} (2/pi) cos^2(theta) / (2 sin(theta) - z) dtheta.
inline Complex stieltjes_quadrature(Complex z, int nodes = 4096) {
  if (!(z.imag() > 0.0))
    throw std::invalid_argument("stieltjes_quadrature: Im z must be positive");
  if (nodes < 64)
    throw std::invalid_argument("stieltjes_quadrature: need at least 64 nodes");
  const auto& rule = detail::gauss_legendre(nodes);
  const double half = 0.5 * std::numbers::pi;
  Complex acc(0.0, 0.0);
  for (int k = 0; k < nodes; ++k) {
    const double theta = half * rule.nodes[k];
    const double c = std::cos(theta);
    acc += rule.weights[k] * c * c / (2.0 * std::sin(theta) - z);
  }
  return acc * half * (2.0 / std::numbers::pi);
}

// Deterministic error parameter of the local law at z = E + i eta.
inline double psi(int n, double eta) { return 1.0 / std::sqrt(n * eta); }

// Stability modulus F_z(r) on r in [0, 1].
inline double f_stability(Complex z, double r) {
  if (!(r >= 0.0 && r <= 1.0))
    throw std::invalid_argument("f_stability: r must lie in [0, 1]");
  const double gap = std::abs(z * z - 4.0);
  const double sr = std::sqrt(r);
  if (gap == 0.0) return sr;  // linear branch degenerates at the edge
  return std::min((1.0 + 1.0 / std::sqrt(gap)) * r, sr);
}

// Residual of the defining quadratic at a candidate transform s.
inline Complex quadratic_residual(Complex s, Complex z) { return s * s + s * z + 1.0; }

struct StabilityRecord {
  Complex z;
  Complex s;  // measured average resolvent diagonal
  double r;   // residual scale fed to F_z
};

struct StabilityReport {
  double fitted_c = 0.0;                   // max |s - m| / F_z(r)
  bool pass = false;                       // fitted_c <= ceiling
  double ceiling = 10.0;
  int precondition_flags = 0;              // records with |R| > (1+|z|) r
  int eta_direction_violations = 0;        // eta not nondecreasing in r
  std::vector<double> ratios;              // per record (inf if F=0, s != m)
};

// Fit the empirical constant in |s - m(z)| = O(F_z(r)) over a record set.
// The residual precondition and the eta-vs-r direction are checked and
// flagged, never fatal: they describe data quality, not correctness.
inline StabilityReport stability_check(const std::vector<StabilityRecord>& records,
                                       double ceiling = 10.0) {
  if (records.empty())
    throw std::invalid_argument("stability_check: empty record set");
  StabilityReport rep;
  rep.ceiling = ceiling;
  rep.ratios.reserve(records.size());
  for (const auto& rec : records) {
    const Complex m = stieltjes(rec.z);
    const double err = std::abs(rec.s - m);
    const double f = f_stability(rec.z, rec.r);
    double ratio;
    if (f > 0.0)
      ratio = err / f;
    else
      ratio = err == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    rep.ratios.push_back(ratio);
    rep.fitted_c = std::max(rep.fitted_c, ratio);
    const double res = std::abs(quadratic_residual(rec.s, rec.z));
    if (res > (1.0 + std::abs(rec.z)) * rec.r) ++rep.precondition_flags;
  }
  // Direction report: sort by r, count eta decreases between neighbors.
  std::vector<size_t> order(records.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return records[a].r < records[b].r;
  });
  for (size_t i = 1; i < order.size(); ++i) {
    if (records[order[i]].z.imag() < records[order[i - 1]].z.imag() - 1e-15)
      ++rep.eta_direction_violations;
  }
  rep.pass = rep.fitted_c <= ceiling;
  return rep;
}

}  // namespace locallaw::semicircle
