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

// Concentration apparatus for resolvent entries under first-row resampling.
//
// Everything here revolves around the conditional expectation E1 = average
// over the first row/column of H with the minor theta (rows/cols 2..N) held
// fixed.  E1 has no closed form, so the reference semantics is brute-force
// resampling: redraw row 1 from the entry law M times and average.  Each
// redraw is answered in O(N^2) by a bordering (Schur-complement) solve that
// reuses one precomputed inverse of (theta - z).
//
// On top of E1 sit:
//   * the Efron-Stein statistic V = sum_i (G^i_kl(h_i) - G^i_kl(0))^2, where
//     G^i(x) is the resolvent of H with the (1,i) entry pair replaced by x
//     (the x = 0 values are minor resolvents, computed by rank-<=2 updates);
//   * the high-probability events
//       Xi      = { Gamma^i(x) <= N^(eps/3+delta) for all i, x in {0, h_i} },
//       Xi-tilde= { max_ij |H_ij| <= N^(eps-1/2) },
//     with the admissibility window eps in (0, eps0(N, delta)),
//     eps0 = (3/4)(1/2 - delta - log4/logN);
//   * moment-inequality and tail checks: the Efron-Stein bound
//     ||Re G_kl - E1 Re G_kl||_{2q}^{2q} <= 2 ||V_Re||_q^q (q = 1, 2),
//     entrywise comparison bounds for minors on the events, and exceedance
//     tables for |G_kl - E1 G_kl| and for products of entries.
//
// The epsilon used by tail thresholds (N^eps times a scale) is a free
// domination parameter and is NOT constrained by eps0; only the event
// definitions are.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "locallaw/domination.hpp"
#include "locallaw/ensemble.hpp"
#include "locallaw/rng.hpp"
#include "locallaw/spectral.hpp"
#include "locallaw/stats.hpp"

namespace locallaw::concentration {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using spectral::SpectralPoint;

// ---------------------------------------------------------------------------
// Event parameters.
// ---------------------------------------------------------------------------

struct EventParams {
  double gamma = 0.5;
  double delta = 0.1;    // must lie in (0, gamma/3)
  double epsilon = 0.05; // must lie in (0, epsilon0(n, delta))

  static double epsilon0(int n, double delta) {
    return 0.75 * (0.5 - delta -
                   std::log(4.0) / std::log(static_cast<double>(n)));
  }
  double t_xi(int n) const {
    return std::pow(static_cast<double>(n), epsilon / 3.0 + delta);
  }
  double t_xi_tilde(int n) const {
    return std::pow(static_cast<double>(n), epsilon - 0.5);
  }
  void validate(int n) const {
    if (n < 2) throw std::invalid_argument("EventParams: n must be >= 2");
    if (!(gamma > 0.0 && gamma <= 1.0))
      throw std::invalid_argument("EventParams: gamma outside (0, 1]");
    if (!(delta > 0.0 && delta < gamma / 3.0))
      throw std::invalid_argument("EventParams: delta outside (0, gamma/3)");
    const double e0 = epsilon0(n, delta);
    if (!(e0 > 0.0))
      throw std::invalid_argument(
          "EventParams: admissible epsilon interval is empty at this size");
    if (!(epsilon > 0.0 && epsilon < e0))
      throw std::invalid_argument("EventParams: epsilon outside (0, epsilon0)");
  }
};

// Default index panel: four fixed pairs near the corner plus `extra` random
// pairs drawn reproducibly from the master seed (dedicated purpose tag).
inline std::vector<std::pair<int, int>> default_panel(int n,
                                                      std::uint64_t master_seed,
                                                      int extra = 4) {
  if (n < 4) throw std::invalid_argument("default_panel: n must be >= 4");
  std::vector<std::pair<int, int>> panel = {{0, 0}, {0, 1}, {1, 1}, {1, 2}};
  rng::Stream st(rng::derive(master_seed,
                             static_cast<std::uint64_t>(rng::Tag::panel),
                             static_cast<std::uint64_t>(n)));
  while (extra > 0) {
    const int k = static_cast<int>(st.next_below(static_cast<std::uint64_t>(n)));
    const int l = static_cast<int>(st.next_below(static_cast<std::uint64_t>(n)));
    bool dup = false;
    for (const auto& kl : panel) dup = dup || (kl.first == k && kl.second == l);
    if (dup) continue;
    panel.emplace_back(k, l);
    --extra;
  }
  return panel;
}

// ---------------------------------------------------------------------------
// Events.
// ---------------------------------------------------------------------------

struct EventIndicators {
  bool xi = false;
  bool xi_tilde = false;
  double max_entry = 0.0;        // max_ij |H_ij|
  double gamma_full = 1.0;       // Gamma(z) of the unperturbed resolvent
  double minor_gamma_max = 1.0;  // max over i of Gamma^i(0)
  int fallbacks = 0;             // dense recomputations in the minor loop
};

// Cheap part of the pair: does max_ij |H_ij| stly below N^(eps-1/2)?
inline bool xi_tilde_indicator(const Matrix& h, const EventParams& params) {
  const int n = static_cast<int>(h.rows());
  params.validate(n);
  return h.cwiseAbs().maxCoeff() <= params.t_xi_tilde(n);
}

// Both indicators; the Xi part walks all N minor resolvents (O(N^3) total).
inline EventIndicators event_indicators(const Matrix& h, const Matrix& g,
                                        SpectralPoint p, const EventParams& params) {
  const int n = static_cast<int>(h.rows());
  params.validate(n);
  if (!spectral::domain_s_contains(p, n, params.gamma))
    throw std::invalid_argument("event_indicators: z outside the admissible window");
  EventIndicators out;
  out.max_entry = h.cwiseAbs().maxCoeff();
  out.gamma_full = spectral::gamma_of(g);
  for (int i = 0; i < n; ++i) {
    const spectral::MinorResolvent mr = spectral::minor_resolvent(h, g, i, p);
    out.fallbacks += mr.fallback ? 1 : 0;
    out.minor_gamma_max = std::max(out.minor_gamma_max, spectral::gamma_of(mr.g));
  }
  const double t = params.t_xi(n);
  out.xi = out.gamma_full <= t && out.minor_gamma_max <= t;
  out.xi_tilde = out.max_entry <= params.t_xi_tilde(n);
  return out;
}

// ---------------------------------------------------------------------------
// The Efron-Stein statistic V at a fixed entry (k,l).
// ---------------------------------------------------------------------------

struct MinorSweep {
  int k = 0, l = 0;
  std::vector<Complex> with_entry;  // G^i_kl(h_i); equals G_kl for every i
  std::vector<Complex> zeroed;      // G^i_kl(0), one minor per i
  double v_re = 0.0;                // sum_i (Re difference)^2
  double v_im = 0.0;                // sum_i (Im difference)^2
  int fallbacks = 0;
};

inline MinorSweep v_statistic(const Matrix& h, const Matrix& g, SpectralPoint p,
                              int k, int l) {
  const int n = static_cast<int>(h.rows());
  if (k < 0 || k >= n || l < 0 || l >= n)
    throw std::invalid_argument("v_statistic: entry index out of range");
  MinorSweep sweep;
  sweep.k = k;
  sweep.l = l;
  sweep.with_entry.assign(n, g(k, l));
  sweep.zeroed.resize(n);
  for (int i = 0; i < n; ++i) {
    const spectral::MinorUpdate up = spectral::minor_update_pieces(h, g, i);
    if (up.invertible) {
      sweep.zeroed[i] = spectral::minor_entry(g, up, k, l);
    } else {
      ++sweep.fallbacks;
      sweep.zeroed[i] =
          spectral::resolvent_direct(ensemble::minor_of(h, 0, i), p)(k, l);
    }
    const Complex d = sweep.with_entry[i] - sweep.zeroed[i];
    sweep.v_re += d.real() * d.real();
    sweep.v_im += d.imag() * d.imag();
  }
  return sweep;
}

// ---------------------------------------------------------------------------
// First-row resampling (the E1 oracle).
//
// With H partitioned as [[h00, r*], [r, theta]] and Q = (theta - z)^(-1),
// the resolvent of H - z is, by the Schur complement,
//   G_00      = alpha = 1/(h00 - z - r* Q r),
//   G_(k+1)0  = -alpha (Q r)_k,          G_0(l+1) = -alpha conj((Q* r)_l),
//   G_(k+1)(l+1) = Q_kl + alpha (Q r)_k conj((Q* r)_l).
// Q is computed once per (theta, z); each new first row costs two matrix-
// vector products, after which any entry is O(1).
// ---------------------------------------------------------------------------

class FirstRowResampler {
 public:
  FirstRowResampler(const ensemble::EnsembleSpec& spec, const Matrix& h,
                    SpectralPoint p)
      : spec_(spec), p_(p) {
    spec_.validate();
    const int n = static_cast<int>(h.rows());
    if (n < 2) throw std::invalid_argument("FirstRowResampler: n must be >= 2");
    if (n != spec_.n)
      throw std::invalid_argument("FirstRowResampler: matrix size != spec.n");
    if (!(p.eta > 0.0))
      throw std::invalid_argument("FirstRowResampler: eta must be positive");
    row0_ = h.row(0);
    Matrix shifted = h.bottomRightCorner(n - 1, n - 1);
    shifted.diagonal().array() -= p.z();
    q_ = shifted.partialPivLu().solve(Matrix::Identity(n - 1, n - 1));
  }

  // Resolvent access for one candidate first row (row[j] = H'_0j).
  struct Solve {
    Complex alpha{0, 0};
    Eigen::VectorXcd w;  // Q r
    Eigen::VectorXcd y;  // Q* r
    const Matrix* q = nullptr;
    Complex entry(int k, int l) const {
      if (k == 0 && l == 0) return alpha;
      if (l == 0) return -alpha * w(k - 1);
      if (k == 0) return -alpha * std::conj(y(l - 1));
      return (*q)(k - 1, l - 1) + alpha * w(k - 1) * std::conj(y(l - 1));
    }
  };

  Solve solve(const Eigen::VectorXcd& first_row) const {
    const int n = spec_.n;
    if (first_row.size() != n)
      throw std::invalid_argument("FirstRowResampler: wrong row length");
    Eigen::VectorXcd r(n - 1);
    for (int k = 0; k + 1 < n; ++k) r(k) = std::conj(first_row(k + 1));
    Solve s;
    s.q = &q_;
    s.w.noalias() = q_ * r;
    s.y.noalias() = q_.adjoint() * r;
    const Complex schur = first_row(0) - p_.z() - r.dot(s.w);
    s.alpha = 1.0 / schur;
    return s;
  }

  const Eigen::VectorXcd& original_row() const { return row0_; }

  // Fresh first row from the entry law, keyed by (trial, resample index) so
  // nested loops stay reproducible under any scheduling.
  Eigen::VectorXcd redraw(std::uint64_t trial, std::uint64_t resample) const {
    Eigen::VectorXcd row(spec_.n);
    for (int j = 0; j < spec_.n; ++j) {
      rng::Stream st(rng::derive(spec_.master_seed, trial,
                                 static_cast<std::uint64_t>(rng::Tag::resample),
                                 resample, ensemble::detail::entry_key(0, j)));
      row(j) = ensemble::draw_entry_with_stream(spec_, st, 0, j);
    }
    return row;
  }

 private:
  ensemble::EnsembleSpec spec_;
  SpectralPoint p_;
  Eigen::VectorXcd row0_;
  Matrix q_;
};

struct ConditionalEstimate {
  Complex estimate{0, 0};
  int resamples = 0;
  double stderror = 0.0;  // sqrt(se_Re^2 + se_Im^2)
};

// Monte Carlo estimate of E1 G_kl with M redraws of the first row.
inline ConditionalEstimate conditional_mean(const FirstRowResampler& resampler,
                                            std::uint64_t trial, int k, int l,
                                            int m_resamples) {
  if (m_resamples < 100)
    throw std::invalid_argument("conditional_mean: need at least 100 resamples");
  std::vector<double> re, im;
  re.reserve(m_resamples);
  im.reserve(m_resamples);
  for (int m = 0; m < m_resamples; ++m) {
    const Complex v = resampler.solve(resampler.redraw(trial, m)).entry(k, l);
    re.push_back(v.real());
    im.push_back(v.imag());
  }
  const stats::MeanStderr mre = stats::mean_stderr(re);
  const stats::MeanStderr mim = stats::mean_stderr(im);
  ConditionalEstimate out;
  out.estimate = Complex(mre.mean, mim.mean);
  out.resamples = m_resamples;
  out.stderror = std::hypot(mre.stderror, mim.stderror);
  return out;
}

// ---------------------------------------------------------------------------
// Efron-Stein inequality check:  ||X - E1 X||_{2q}^{2q} <= 2 ||V||_q^q for
// X = Re G_kl (and the analogous statement for Im).  Both sides are Monte
// Carlo estimates, so the verdict allows 4 combined standard errors.
// ---------------------------------------------------------------------------

struct EfronSteinReport {
  int k = 0, l = 0, q = 1;
  int trials = 0, resamples = 0;
  double lhs_re = 0.0, lhs_se_re = 0.0, rhs_re = 0.0, rhs_se_re = 0.0;
  double lhs_im = 0.0, lhs_se_im = 0.0, rhs_im = 0.0, rhs_se_im = 0.0;
  bool pass_re = false, pass_im = false;
  int fallbacks = 0;
  bool pass() const { return pass_re && pass_im; }
};

inline EfronSteinReport efron_stein_check(const ensemble::EnsembleSpec& spec,
                                          SpectralPoint p, int k, int l, int q,
                                          int outer_trials, int inner_resamples,
                                          std::uint64_t trial_offset = 0) {
  if (q != 1 && q != 2)
    throw std::invalid_argument("efron_stein_check: q must be 1 or 2");
  if (outer_trials < 30)
    throw std::invalid_argument("efron_stein_check: need at least 30 outer trials");
  spec.validate();
  if (k < 0 || k >= spec.n || l < 0 || l >= spec.n)
    throw std::invalid_argument("efron_stein_check: entry index out of range");
  std::vector<double> lhs_re, lhs_im, vq_re, vq_im;
  EfronSteinReport rep;
  rep.k = k;
  rep.l = l;
  rep.q = q;
  rep.trials = outer_trials;
  rep.resamples = inner_resamples;
  for (int t = 0; t < outer_trials; ++t) {
    const std::uint64_t trial = trial_offset + static_cast<std::uint64_t>(t);
    const ensemble::WignerMatrix w = ensemble::sample_wigner(spec, trial);
    const Matrix g = spectral::resolvent_direct(w.h, p);
    const FirstRowResampler resampler(spec, w.h, p);
    const Complex est = conditional_mean(resampler, trial, k, l, inner_resamples).estimate;
    const Complex dev = g(k, l) - est;
    const double dre2 = dev.real() * dev.real();
    const double dim2 = dev.imag() * dev.imag();
    lhs_re.push_back(q == 1 ? dre2 : dre2 * dre2);
    lhs_im.push_back(q == 1 ? dim2 : dim2 * dim2);
    const MinorSweep sweep = v_statistic(w.h, g, p, k, l);
    rep.fallbacks += sweep.fallbacks;
    vq_re.push_back(q == 1 ? sweep.v_re : sweep.v_re * sweep.v_re);
    vq_im.push_back(q == 1 ? sweep.v_im : sweep.v_im * sweep.v_im);
  }
  const auto finish = [](const std::vector<double>& lhs, const std::vector<double>& vq,
                         double& lhs_mean, double& lhs_se, double& rhs_mean,
                         double& rhs_se, bool& pass) {
    const stats::MeanStderr ml = stats::mean_stderr(lhs);
    const stats::MeanStderr mv = stats::mean_stderr(vq);
    lhs_mean = ml.mean;
    lhs_se = ml.stderror;
    rhs_mean = 2.0 * mv.mean;
    rhs_se = 2.0 * mv.stderror;
    pass = lhs_mean <= rhs_mean + 4.0 * std::hypot(lhs_se, rhs_se);
  };
  finish(lhs_re, vq_re, rep.lhs_re, rep.lhs_se_re, rep.rhs_re, rep.rhs_se_re, rep.pass_re);
  finish(lhs_im, vq_im, rep.lhs_im, rep.lhs_se_im, rep.rhs_im, rep.rhs_se_im, rep.pass_im);
  return rep;
}

// ---------------------------------------------------------------------------
// Entrywise minor-comparison bounds on the events:
//   on Xi and Xi-tilde:  |G^i_kl(0)| <= 2 N^(eps/3+delta)   (threshold bound)
//                        |G^i_kl(0)| <= 2 |G_kl|            (entrywise bound)
//   off Xi:              |G^i_kl(0)| <= N
//   always:              |G^i_kl(0)| <= min(N, 1/eta)       (resolvent cap)
// A Gamma-level variant |G^i_kl(0)| <= 2 Gamma(z) is tallied alongside as a
// diagnostic; it is the additive form the entrywise bound relaxes to.
// Comparisons carry a 1e-9 relative guard so pure roundoff never counts.
// ---------------------------------------------------------------------------

struct MinorComparisonReport {
  bool xi = false, xi_tilde = false;
  long event_checks = 0;
  long threshold_violations = 0;  // > 2 N^(eps/3+delta) on the events
  long entrywise_violations = 0;  // > 2 |G_kl| on the events
  long gamma_violations = 0;      // > 2 Gamma(z) on the events (diagnostic)
  long off_event_checks = 0;
  long off_event_violations = 0;  // > N off Xi
  long cap_violations = 0;        // > min(N, 1/eta) anywhere
  double worst_threshold_ratio = 0.0;  // max |G^i_kl(0)| / (2 t_xi)
  double worst_entrywise_ratio = 0.0;  // max |G^i_kl(0)| / (2 |G_kl|)
  int fallbacks = 0;
};

inline MinorComparisonReport minor_comparison_check(
    const Matrix& h, const Matrix& g, SpectralPoint p, const EventParams& params,
    const std::vector<std::pair<int, int>>& panel) {
  const int n = static_cast<int>(h.rows());
  params.validate(n);
  if (panel.empty())
    throw std::invalid_argument("minor_comparison_check: empty panel");
  for (const auto& kl : panel)
    if (kl.first < 0 || kl.first >= n || kl.second < 0 || kl.second >= n)
      throw std::invalid_argument("minor_comparison_check: panel index out of range");
  MinorComparisonReport rep;
  const double t_xi = params.t_xi(n);
  const double guard = 1.0 + 1e-9;
  const double cap = std::min(static_cast<double>(n), 1.0 / p.eta);
  const double gamma_full = spectral::gamma_of(g);
  double minor_gamma_max = 1.0;
  // One pass over the minors collects their Gamma values (the Xi indicator
  // needs all of them) and the panel entries.
  std::vector<std::vector<double>> vals(panel.size(), std::vector<double>(n));
  for (int i = 0; i < n; ++i) {
    const spectral::MinorResolvent mr = spectral::minor_resolvent(h, g, i, p);
    rep.fallbacks += mr.fallback ? 1 : 0;
    minor_gamma_max = std::max(minor_gamma_max, spectral::gamma_of(mr.g));
    for (size_t u = 0; u < panel.size(); ++u)
      vals[u][static_cast<size_t>(i)] = std::abs(mr.g(panel[u].first, panel[u].second));
  }
  rep.xi = gamma_full <= t_xi && minor_gamma_max <= t_xi;
  rep.xi_tilde = h.cwiseAbs().maxCoeff() <= params.t_xi_tilde(n);
  for (size_t u = 0; u < panel.size(); ++u) {
    const double gkl = std::abs(g(panel[u].first, panel[u].second));
    for (int i = 0; i < n; ++i) {
      const double a = vals[u][static_cast<size_t>(i)];
      if (a > cap * guard) ++rep.cap_violations;
      if (rep.xi && rep.xi_tilde) {
        ++rep.event_checks;
        if (a > 2.0 * t_xi * guard) ++rep.threshold_violations;
        if (a > 2.0 * gkl * guard) ++rep.entrywise_violations;
        if (a > 2.0 * gamma_full * guard) ++rep.gamma_violations;
        rep.worst_threshold_ratio = std::max(rep.worst_threshold_ratio, a / (2.0 * t_xi));
        if (gkl > 0.0)
          rep.worst_entrywise_ratio = std::max(rep.worst_entrywise_ratio, a / (2.0 * gkl));
      } else if (!rep.xi) {
        ++rep.off_event_checks;
        if (a > static_cast<double>(n) * guard) ++rep.off_event_violations;
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Tail tables.
// ---------------------------------------------------------------------------

// Exceedance of max_ij |H_ij| over N^(eps-1/2) along an N-ladder.  The eps
// here is a free tail parameter (any positive value is admissible).
inline domination::TailTable entry_bound_tails(const ensemble::EnsembleSpec& base,
                                               const std::vector<int>& ladder,
                                               double epsilon, int trials) {
  if (!(epsilon > 0.0))
    throw std::invalid_argument("entry_bound_tails: epsilon must be positive");
  if (trials < 200)
    throw std::invalid_argument("entry_bound_tails: need at least 200 trials");
  if (ladder.empty()) throw std::invalid_argument("entry_bound_tails: empty ladder");
  domination::TailTable table;
  for (int n : ladder) {
    ensemble::EnsembleSpec spec = base;
    spec.n = n;
    spec.validate();
    const double threshold = std::pow(static_cast<double>(n), epsilon - 0.5);
    long exceed = 0;
    for (int t = 0; t < trials; ++t) {
      bool over = false;
      for (int i = 0; i < n && !over; ++i)
        for (int j = i; j < n && !over; ++j)
          over = std::abs(ensemble::draw_entry(
                     spec, static_cast<std::uint64_t>(t), i, j)) > threshold;
      if (over) ++exceed;
    }
    domination::TailRow row;
    row.n = n;
    row.epsilon = epsilon;
    row.threshold = threshold;
    row.exceed = exceed;
    row.trials = trials;
    row.ci = domination::wilson_interval(exceed, trials);
    table.rows.push_back(row);
  }
  return table;
}

// Exceedance of |G_kl - E1 G_kl| over N^eps * N^(3 delta/2) / sqrt(N eta)
// along an N-ladder; p-hat per rung is the sup over the index panel.
inline domination::TailTable concentration_tails(
    const ensemble::EnsembleSpec& base, const std::vector<int>& ladder,
    const std::function<SpectralPoint(int)>& z_rule, double delta,
    double epsilon, int trials, int resamples) {
  if (!(delta > 0.0) || !(epsilon > 0.0))
    throw std::invalid_argument("concentration_tails: delta and epsilon must be positive");
  if (trials < 50)
    throw std::invalid_argument("concentration_tails: need at least 50 trials");
  if (resamples < 100)
    throw std::invalid_argument("concentration_tails: need at least 100 resamples");
  if (ladder.empty()) throw std::invalid_argument("concentration_tails: empty ladder");
  domination::TailTable table;
  for (int n : ladder) {
    ensemble::EnsembleSpec spec = base;
    spec.n = n;
    spec.validate();
    const SpectralPoint p = z_rule(n);
    if (!(p.eta > 0.0) || p.eta > n || std::abs(p.e) > n)
      throw std::invalid_argument("concentration_tails: z-rule left the admissible window");
    const double threshold = std::pow(static_cast<double>(n), epsilon) *
                             std::pow(static_cast<double>(n), 1.5 * delta) /
                             std::sqrt(n * p.eta);
    const std::vector<std::pair<int, int>> panel = default_panel(n, spec.master_seed);
    std::vector<long> counts(panel.size(), 0);
    for (int t = 0; t < trials; ++t) {
      const std::uint64_t trial = static_cast<std::uint64_t>(t);
      const ensemble::WignerMatrix w = ensemble::sample_wigner(spec, trial);
      const Matrix g = spectral::resolvent_direct(w.h, p);
      const FirstRowResampler resampler(spec, w.h, p);
      std::vector<Complex> acc(panel.size(), Complex(0, 0));
      for (int m = 0; m < resamples; ++m) {
        const FirstRowResampler::Solve s =
            resampler.solve(resampler.redraw(trial, static_cast<std::uint64_t>(m)));
        for (size_t u = 0; u < panel.size(); ++u)
          acc[u] += s.entry(panel[u].first, panel[u].second);
      }
      for (size_t u = 0; u < panel.size(); ++u) {
        const Complex est = acc[u] / static_cast<double>(resamples);
        if (std::abs(g(panel[u].first, panel[u].second) - est) > threshold)
          ++counts[u];
      }
    }
    domination::TailRow row;
    row.n = n;
    row.epsilon = epsilon;
    row.threshold = threshold;
    row.exceed = *std::max_element(counts.begin(), counts.end());
    row.trials = trials;
    row.ci = domination::wilson_interval(row.exceed, trials);
    table.rows.push_back(row);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Product concentration: tail of |X1 X2 - E1(X1 X2)| against
// N^eps * N^(5 delta/2) / sqrt(N eta), for entry-built X1, X2 capped at
// N^delta (samples violating the cap are excluded and counted).
// ---------------------------------------------------------------------------

struct ProductSample {
  Complex x1{0, 0};
  Complex x2{0, 0};
  Complex e1_product{0, 0};  // estimate of E1(X1 X2)
};

struct ProductTailReport {
  int n = 0;
  double eta = 0.0;
  double delta = 0.0;
  double epsilon = 0.0;
  double threshold = 0.0;
  long used = 0;
  long excluded = 0;
  long exceed = 0;
  domination::Interval ci;
};

inline ProductTailReport product_concentration_check(
    const std::vector<ProductSample>& samples, int n, double eta, double delta,
    double epsilon) {
  if (samples.empty())
    throw std::invalid_argument("product_concentration_check: no samples");
  if (!(delta > 0.0) || !(epsilon > 0.0))
    throw std::invalid_argument("product_concentration_check: delta and epsilon must be positive");
  if (n < 2 || !(eta > 0.0))
    throw std::invalid_argument("product_concentration_check: bad (n, eta)");
  ProductTailReport rep;
  rep.n = n;
  rep.eta = eta;
  rep.delta = delta;
  rep.epsilon = epsilon;
  const double cap = std::pow(static_cast<double>(n), delta);
  rep.threshold = std::pow(static_cast<double>(n), epsilon) *
                  std::pow(static_cast<double>(n), 2.5 * delta) /
                  std::sqrt(n * eta);
  for (const ProductSample& s : samples) {
    if (std::abs(s.x1) > cap || std::abs(s.x2) > cap) {
      ++rep.excluded;
      continue;
    }
    ++rep.used;
    if (std::abs(s.x1 * s.x2 - s.e1_product) > rep.threshold) ++rep.exceed;
  }
  if (rep.used == 0)
    throw std::runtime_error("product_concentration_check: all samples excluded");
  rep.ci = domination::wilson_interval(rep.exceed, rep.used);
  return rep;
}

// Convenience builder: per trial, X1 = G_k1l1, X2 = G_k2l2, and the E1
// estimate of their product by first-row resampling.
inline std::vector<ProductSample> product_samples(
    const ensemble::EnsembleSpec& spec, SpectralPoint p, int k1, int l1, int k2,
    int l2, int trials, int resamples, std::uint64_t trial_offset = 0) {
  spec.validate();
  if (trials < 1) throw std::invalid_argument("product_samples: trials must be positive");
  if (resamples < 100)
    throw std::invalid_argument("product_samples: need at least 100 resamples");
  std::vector<ProductSample> out;
  out.reserve(trials);
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t trial = trial_offset + static_cast<std::uint64_t>(t);
    const ensemble::WignerMatrix w = ensemble::sample_wigner(spec, trial);
    const Matrix g = spectral::resolvent_direct(w.h, p);
    const FirstRowResampler resampler(spec, w.h, p);
    Complex acc(0, 0);
    for (int m = 0; m < resamples; ++m) {
      const FirstRowResampler::Solve s =
          resampler.solve(resampler.redraw(trial, static_cast<std::uint64_t>(m)));
      acc += s.entry(k1, l1) * s.entry(k2, l2);
    }
    ProductSample sample;
    sample.x1 = g(k1, l1);
    sample.x2 = g(k2, l2);
    sample.e1_product = acc / static_cast<double>(resamples);
    out.push_back(sample);
  }
  return out;
}

}  // namespace locallaw::concentration
