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

// Multi-scale bootstrap: walk eta down a geometric ladder and check, level by
// level, that resolvent control survives the descent.
//
// The ladder is eta_k = N * N^(-k delta) for k = 0..K with
// K = max{ k : N^(1 - k delta) >= N^(-1+gamma) } = floor((2-gamma)/delta).
// Exponents are stored, not the floats, so eta_(k+1) = eta_k / N^delta holds
// exactly in log space.  At the top scale eta_0 = N every resolvent entry is
// at most 1/N, which seeds the induction; the deterministic propagation
// inequality Gamma(E + i eta/M) <= M * Gamma(E + i eta) carries control one
// step down, and at each new level the error bounds
//   max_i |G_ii - m|    vs  F_z(N^(5 delta)/sqrt(N eta)) * N^delta,
//   max_{i!=j} |G_ij|   vs  N^(5 delta/2)/sqrt(N eta),
// are re-checked as exceedance frequencies over trials.  A variant of the
// diagonal bound with N^(5 delta/2) inside F is tallied alongside (the two
// forms appear in different places; we gate on the first and record both).
//
// "Gamma* = O(1)" has no finite-N truth value, so it becomes a configurable
// cap (default 3: |m| <= 1 plus fluctuation margin) with exceedance counts,
// evaluated on the certified geometric Gamma* grid from the spectral module.
// One shared anchor sweep serves every level; the per-level values are
// bit-identical to standalone spectral::gamma_star calls on the same grid.
//
// The end-to-end sweep (local_law_sweep) gathers the flagship observables --
// max_i |G_ii - m|, max_{i != j} |G_ij|, and the quadratic residual
// |1 + z s + s^2| for s = (1/N) tr G -- across an N-ladder at
// eta = N^(-1+gamma), with psi(z) = (N eta)^(-1/2) reference curves, log-log
// slope fits, and the fitted stability constant.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "locallaw/domination.hpp"
#include "locallaw/ensemble.hpp"
#include "locallaw/semicircle.hpp"
#include "locallaw/spectral.hpp"
#include "locallaw/stats.hpp"

namespace locallaw::bootstrap {

using Complex = std::complex<double>;
using spectral::SpectralPoint;

// ---------------------------------------------------------------------------
// Scale ladder.
// ---------------------------------------------------------------------------

struct ScaleLadder {
  int n = 0;
  double e = 0.0;
  double gamma = 0.5;
  double delta = 0.15;
  int k_max = 0;  // K

  double exponent(int k) const { return 1.0 - k * delta; }
  double eta(int k) const {
    return std::pow(static_cast<double>(n), exponent(k));
  }
  SpectralPoint point(int k) const { return {e, eta(k)}; }
  int size() const { return k_max + 1; }
};

inline ScaleLadder build_ladder(int n, double e, double gamma, double delta) {
  if (n < 2) throw std::invalid_argument("build_ladder: n must be >= 2");
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw std::invalid_argument("build_ladder: gamma outside (0, 1]");
  if (!(delta > 0.0 && delta < gamma / 3.0))
    throw std::invalid_argument("build_ladder: delta outside (0, gamma/3)");
  if (std::abs(e) > n)
    throw std::invalid_argument("build_ladder: |E| exceeds N");
  ScaleLadder lad;
  lad.n = n;
  lad.e = e;
  lad.gamma = gamma;
  lad.delta = delta;
  // K = max{ k : 1 - k delta >= -1 + gamma }, i.e. k <= (2-gamma)/delta.
  // The 1e-9 nudge keeps exact ties (e.g. 1.5/0.3) from rounding down.
  lad.k_max = static_cast<int>(std::floor((2.0 - gamma) / delta + 1e-9));
  return lad;
}

// ---------------------------------------------------------------------------
// Deterministic propagation inequality.
// ---------------------------------------------------------------------------

struct PropagationResult {
  double lhs = 0.0;    // Gamma(E + i eta/M)
  double rhs = 0.0;    // M * Gamma(E + i eta)
  double ratio = 0.0;  // lhs / rhs
  bool pass = false;   // lhs <= rhs within 1e-10 relative slack
};

inline PropagationResult propagation_check(const spectral::SpectralDecomposition& dec,
                                           double e, double eta, double m) {
  if (!(m > 1.0)) throw std::invalid_argument("propagation_check: M must exceed 1");
  if (!(eta > 0.0)) throw std::invalid_argument("propagation_check: eta must be positive");
  PropagationResult out;
  out.lhs = spectral::gamma_of(spectral::resolvent(dec, {e, eta / m}));
  out.rhs = m * spectral::gamma_of(spectral::resolvent(dec, {e, eta}));
  out.ratio = out.lhs / out.rhs;
  out.pass = out.lhs <= out.rhs * (1.0 + 1e-10);
  return out;
}

// ---------------------------------------------------------------------------
// Gamma* for every ladder level from one shared anchor sweep.  The grid for
// level k is the geometric anchor prefix above eta_k plus eta_k itself --
// exactly the grid spectral::gamma_star(dec, E, eta_k, N, ratio) uses, so
// the results agree bit for bit while the anchors are evaluated only once.
// ---------------------------------------------------------------------------

inline std::vector<spectral::GammaStarBound> ladder_gamma_star(
    const spectral::SpectralDecomposition& dec, const ScaleLadder& lad,
    double ratio = 1.05) {
  if (!(ratio > 1.0)) throw std::invalid_argument("ladder_gamma_star: ratio must exceed 1");
  const double eta_top = lad.eta(0);
  const double eta_bottom = lad.eta(lad.k_max);
  std::vector<double> anchors;
  for (double x = eta_top; x > eta_bottom * (1.0 + 1e-12); x /= ratio)
    anchors.push_back(x);
  std::vector<double> anchor_gamma(anchors.size());
  for (size_t j = 0; j < anchors.size(); ++j)
    anchor_gamma[j] =
        spectral::gamma_of(spectral::resolvent(dec, {lad.e, anchors[j]}));
  std::vector<spectral::GammaStarBound> out(lad.size());
  for (int k = 0; k < lad.size(); ++k) {
    const double eta_k = lad.eta(k);
    size_t len = 0;
    while (len < anchors.size() && anchors[len] > eta_k * (1.0 + 1e-12)) ++len;
    spectral::GammaStarBound b;
    b.points = static_cast<int>(len) + 1;
    for (size_t j = 0; j < len; ++j) {
      b.grid_sup = std::max(b.grid_sup, anchor_gamma[j]);
      if (j + 1 < len)
        b.slack = std::max(b.slack, (anchors[j] - anchors[j + 1]) /
                                        (anchors[j + 1] * anchors[j + 1]));
    }
    if (len > 0)
      b.slack = std::max(b.slack, (anchors[len - 1] - eta_k) / (eta_k * eta_k));
    b.grid_sup = std::max(
        b.grid_sup, spectral::gamma_of(spectral::resolvent(dec, {lad.e, eta_k})));
    out[static_cast<size_t>(k)] = b;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bootstrap run.
// ---------------------------------------------------------------------------

struct LevelReport {
  int k = 0;
  double eta = 0.0;
  long trials = 0;
  // Gamma* summaries (grid supremum; certified = grid_sup + Lipschitz slack).
  double gamma_sup_median = 0.0, gamma_sup_p95 = 0.0, certified_median = 0.0;
  // Error summaries.
  double diag_median = 0.0, diag_p95 = 0.0;
  double offdiag_median = 0.0, offdiag_p95 = 0.0;
  // Bounds (levels >= 1; zero at level 0 where only the cap applies).
  double diag_bound = 0.0;      // F_z(min(1, N^(5d)/sqrt(N eta))) * N^d
  double diag_bound_52 = 0.0;   // variant with N^(5d/2) inside F
  double offdiag_bound = 0.0;   // N^(5d/2)/sqrt(N eta)
  double r_raw = 0.0;           // N^(5d)/sqrt(N eta) before clamping to 1
  // Exceedance counts over trials.
  long cap_exceed = 0;      // Gamma* grid_sup > cap
  long step_exceed = 0;     // Gamma* grid_sup > N^delta * cap (levels >= 1)
  long diag_exceed = 0;     // max_i |G_ii - m| > diag_bound (levels >= 1)
  long diag_exceed_52 = 0;  // against the 5d/2 variant (levels >= 1)
  long offdiag_exceed = 0;  // max_{i!=j} |G_ij| > offdiag_bound (levels >= 1)
};

struct BootstrapTrace {
  int n = 0;
  double e = 0.0, gamma = 0.5, delta = 0.15;
  double cap = 3.0, grid_ratio = 1.05;
  int k_max = 0;
  std::vector<LevelReport> levels;
  bool offdiag_monotone = true;  // medians nondecreasing as eta shrinks

  // Largest exceedance frequency over every gated check at every level.
  double max_exceed_frequency() const {
    double worst = 0.0;
    for (const LevelReport& lv : levels) {
      const double t = static_cast<double>(lv.trials);
      worst = std::max(worst, lv.cap_exceed / t);
      if (lv.k > 0) {
        worst = std::max(worst, lv.step_exceed / t);
        worst = std::max(worst, lv.diag_exceed / t);
        worst = std::max(worst, lv.offdiag_exceed / t);
      }
    }
    return worst;
  }
};

// Everything run_bootstrap learns from a single matrix: per level, the
// Gamma* grid values and the two error statistics.  One decomposition per
// trial; every z-evaluation reuses it.
struct BootstrapTrialData {
  std::vector<double> sup, certified, diag, offd;  // indexed by level
};

inline BootstrapTrialData bootstrap_trial_from(
    const spectral::SpectralDecomposition& dec, const ScaleLadder& lad,
    double grid_ratio) {
  const std::vector<spectral::GammaStarBound> stars =
      ladder_gamma_star(dec, lad, grid_ratio);
  BootstrapTrialData data;
  for (int k = 0; k < lad.size(); ++k) {
    const SpectralPoint p = lad.point(k);
    const spectral::ResolventStats st = spectral::stats(
        spectral::resolvent(dec, p), semicircle::stieltjes(p.z()));
    data.sup.push_back(stars[static_cast<size_t>(k)].grid_sup);
    data.certified.push_back(stars[static_cast<size_t>(k)].certified());
    data.diag.push_back(st.diag_err_max);
    data.offd.push_back(st.offdiag_max);
  }
  return data;
}

inline BootstrapTrialData bootstrap_trial(const ensemble::EnsembleSpec& spec,
                                          const ScaleLadder& lad, double grid_ratio,
                                          std::uint64_t trial) {
  const ensemble::WignerMatrix w = ensemble::sample_wigner(spec, trial);
  return bootstrap_trial_from(spectral::decompose(w.h), lad, grid_ratio);
}

// Deterministic fold of per-trial data (in trial order) into the trace;
// serial and threaded producers agree exactly.
inline BootstrapTrace fold_bootstrap(const ensemble::EnsembleSpec& spec, double e,
                                     double gamma, double delta, double cap,
                                     double grid_ratio,
                                     const std::vector<BootstrapTrialData>& data) {
  if (data.empty()) throw std::invalid_argument("fold_bootstrap: no trial data");
  const ScaleLadder lad = build_ladder(spec.n, e, gamma, delta);
  const int levels = lad.size();
  const int trials = static_cast<int>(data.size());
  const double nd = std::pow(static_cast<double>(spec.n), delta);

  BootstrapTrace trace;
  trace.n = spec.n;
  trace.e = e;
  trace.gamma = gamma;
  trace.delta = delta;
  trace.cap = cap;
  trace.grid_ratio = grid_ratio;
  trace.k_max = lad.k_max;
  trace.levels.resize(levels);

  std::vector<std::vector<double>> sup(levels), certified(levels), diag(levels),
      offd(levels);
  for (const BootstrapTrialData& d : data) {
    if (static_cast<int>(d.sup.size()) != levels)
      throw std::invalid_argument("fold_bootstrap: level count mismatch");
    for (int k = 0; k < levels; ++k) {
      sup[k].push_back(d.sup[static_cast<size_t>(k)]);
      certified[k].push_back(d.certified[static_cast<size_t>(k)]);
      diag[k].push_back(d.diag[static_cast<size_t>(k)]);
      offd[k].push_back(d.offd[static_cast<size_t>(k)]);
    }
  }

  for (int k = 0; k < levels; ++k) {
    LevelReport& lv = trace.levels[static_cast<size_t>(k)];
    lv.k = k;
    lv.eta = lad.eta(k);
    lv.trials = trials;
    lv.gamma_sup_median = stats::median(sup[k]);
    lv.gamma_sup_p95 = stats::quantile(sup[k], 0.95);
    lv.certified_median = stats::median(certified[k]);
    lv.diag_median = stats::median(diag[k]);
    lv.diag_p95 = stats::quantile(diag[k], 0.95);
    lv.offdiag_median = stats::median(offd[k]);
    lv.offdiag_p95 = stats::quantile(offd[k], 0.95);
    for (double v : sup[k])
      if (v > cap) ++lv.cap_exceed;
    if (k > 0) {
      const double sqrt_neta = std::sqrt(spec.n * lv.eta);
      lv.r_raw = std::pow(static_cast<double>(spec.n), 5.0 * delta) / sqrt_neta;
      const double r_52 =
          std::pow(static_cast<double>(spec.n), 2.5 * delta) / sqrt_neta;
      const Complex z = lad.point(k).z();
      lv.diag_bound = semicircle::f_stability(z, std::min(1.0, lv.r_raw)) * nd;
      lv.diag_bound_52 = semicircle::f_stability(z, std::min(1.0, r_52)) * nd;
      lv.offdiag_bound = r_52;
      for (double v : sup[k])
        if (v > nd * cap) ++lv.step_exceed;
      for (double v : diag[k]) {
        if (v > lv.diag_bound) ++lv.diag_exceed;
        if (v > lv.diag_bound_52) ++lv.diag_exceed_52;
      }
      for (double v : offd[k])
        if (v > lv.offdiag_bound) ++lv.offdiag_exceed;
    }
    if (k > 0 &&
        lv.offdiag_median <
            trace.levels[static_cast<size_t>(k - 1)].offdiag_median - 1e-12)
      trace.offdiag_monotone = false;
  }
  return trace;
}

inline BootstrapTrace run_bootstrap(const ensemble::EnsembleSpec& spec, double e,
                                    double gamma, double delta, int trials,
                                    double cap = 3.0, double grid_ratio = 1.05,
                                    std::uint64_t trial_offset = 0) {
  if (trials < 1) throw std::invalid_argument("run_bootstrap: trials must be positive");
  if (!(cap > 0.0)) throw std::invalid_argument("run_bootstrap: cap must be positive");
  spec.validate();
  const ScaleLadder lad = build_ladder(spec.n, e, gamma, delta);
  std::vector<BootstrapTrialData> data;
  data.reserve(static_cast<size_t>(trials));
  for (int t = 0; t < trials; ++t)
    data.push_back(bootstrap_trial(
        spec, lad, grid_ratio, trial_offset + static_cast<std::uint64_t>(t)));
  return fold_bootstrap(spec, e, gamma, delta, cap, grid_ratio, data);
}

// ---------------------------------------------------------------------------
// End-to-end error sweep at eta = N^(-1+gamma).
// ---------------------------------------------------------------------------

struct TrialMetrics {
  int n = 0;
  std::uint64_t trial = 0;
  double e = 0.0, eta = 0.0;
  double diag_err = 0.0;     // max_i |G_ii - m|
  double offdiag_max = 0.0;  // max_{i != j} |G_ij|
  double residual = 0.0;     // |1 + z s + s^2|
  double s_minus_m = 0.0;    // |s - m|
  Complex s{0, 0};
};

// One observation: sample the matrix, solve at z = E + i eta, read off the
// flagship statistics.  A single LU solve; no eigendecomposition needed.
inline TrialMetrics sweep_one(const ensemble::EnsembleSpec& spec,
                              std::uint64_t trial, double e, double eta) {
  const ensemble::WignerMatrix w = ensemble::sample_wigner(spec, trial);
  const SpectralPoint p{e, eta};
  const Eigen::MatrixXcd g = spectral::resolvent_direct(w.h, p);
  const Complex m = semicircle::stieltjes(p.z());
  const spectral::ResolventStats st = spectral::stats(g, m);
  TrialMetrics out;
  out.n = spec.n;
  out.trial = trial;
  out.e = e;
  out.eta = eta;
  out.diag_err = st.diag_err_max;
  out.offdiag_max = st.offdiag_max;
  out.residual = std::abs(semicircle::quadratic_residual(st.s, p.z()));
  out.s_minus_m = std::abs(st.s - m);
  out.s = st.s;
  return out;
}

struct SweepCell {
  int n = 0;
  double e = 0.0, eta = 0.0;
  long trials = 0;
  double diag_median = 0.0, diag_p95 = 0.0;
  double offdiag_median = 0.0, offdiag_p95 = 0.0;
  double residual_median = 0.0, residual_p95 = 0.0;
  double psi_ref = 0.0;            // (N eta)^(-1/2)
  double f_psi_ref = 0.0;          // F_z(psi)
  double envelope_bound = 0.0;     // (1+|z|) * psi * 10
  bool envelope_pass = false;      // residual_median <= envelope_bound
};

struct SweepResult {
  double gamma = 0.5;
  std::vector<TrialMetrics> samples;
  std::vector<SweepCell> cells;
  semicircle::StabilityReport stability;  // fitted C over all samples
  bool slopes_available = false;          // single E, >= 3 ladder sizes
  domination::SlopeFit diag_slope, offdiag_slope, residual_slope;
};

// Deterministic fold of per-trial samples into cells, fits, and the fitted
// stability constant.  Samples may arrive in any order; they are sorted by
// (n, E, trial) first, so threaded and serial producers agree exactly.
inline SweepResult aggregate_sweep(std::vector<TrialMetrics> samples, double gamma) {
  if (samples.empty())
    throw std::invalid_argument("aggregate_sweep: no samples");
  std::sort(samples.begin(), samples.end(),
            [](const TrialMetrics& a, const TrialMetrics& b) {
              if (a.n != b.n) return a.n < b.n;
              if (a.e != b.e) return a.e < b.e;
              return a.trial < b.trial;
            });
  SweepResult out;
  out.gamma = gamma;
  std::vector<semicircle::StabilityRecord> stability_records;
  stability_records.reserve(samples.size());
  size_t lo = 0;
  while (lo < samples.size()) {
    size_t hi = lo;
    while (hi < samples.size() && samples[hi].n == samples[lo].n &&
           samples[hi].e == samples[lo].e)
      ++hi;
    std::vector<double> dv, ov, rv;
    for (size_t t = lo; t < hi; ++t) {
      dv.push_back(samples[t].diag_err);
      ov.push_back(samples[t].offdiag_max);
      rv.push_back(samples[t].residual);
      const Complex z(samples[t].e, samples[t].eta);
      semicircle::StabilityRecord rec;
      rec.z = z;
      rec.s = samples[t].s;
      // Smallest admissible residual scale, nudged so the strict-inequality
      // precondition check cannot trip on rounding alone.
      rec.r = std::min(
          1.0, samples[t].residual * (1.0 + 1e-12) / (1.0 + std::abs(z)));
      stability_records.push_back(rec);
    }
    SweepCell cell;
    cell.n = samples[lo].n;
    cell.e = samples[lo].e;
    cell.eta = samples[lo].eta;
    cell.trials = static_cast<long>(hi - lo);
    cell.diag_median = stats::median(dv);
    cell.diag_p95 = stats::quantile(dv, 0.95);
    cell.offdiag_median = stats::median(ov);
    cell.offdiag_p95 = stats::quantile(ov, 0.95);
    cell.residual_median = stats::median(rv);
    cell.residual_p95 = stats::quantile(rv, 0.95);
    const Complex z(cell.e, cell.eta);
    cell.psi_ref = 1.0 / std::sqrt(cell.n * cell.eta);
    cell.f_psi_ref = semicircle::f_stability(z, std::min(1.0, cell.psi_ref));
    cell.envelope_bound = (1.0 + std::abs(z)) * cell.psi_ref * 10.0;
    cell.envelope_pass = cell.residual_median <= cell.envelope_bound;
    out.cells.push_back(cell);
    lo = hi;
  }
  out.stability = semicircle::stability_check(stability_records, 10.0);
  // Slope fits only for a single-E sweep with at least three sizes.
  bool single_e = true;
  for (const SweepCell& c : out.cells) single_e = single_e && c.e == out.cells[0].e;
  if (single_e && out.cells.size() >= 3) {
    std::vector<int> ns;
    std::vector<double> dmed, omed, rmed;
    for (const SweepCell& c : out.cells) {
      ns.push_back(c.n);
      dmed.push_back(c.diag_median);
      omed.push_back(c.offdiag_median);
      rmed.push_back(c.residual_median);
    }
    out.diag_slope = domination::exponent_fit(ns, dmed);
    out.offdiag_slope = domination::exponent_fit(ns, omed);
    out.residual_slope = domination::exponent_fit(ns, rmed);
    out.slopes_available = true;
  }
  out.samples = std::move(samples);
  return out;
}

// Serial reference sweep; the harness runs the same sweep_one units in
// parallel and feeds the identical aggregate_sweep fold.
inline SweepResult local_law_sweep(const ensemble::EnsembleSpec& base,
                                   const std::vector<int>& n_ladder,
                                   const std::vector<double>& e_grid,
                                   double gamma, int trials,
                                   std::uint64_t trial_offset = 0) {
  if (n_ladder.empty() || e_grid.empty())
    throw std::invalid_argument("local_law_sweep: empty ladder or E-grid");
  if (trials < 1) throw std::invalid_argument("local_law_sweep: trials must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw std::invalid_argument("local_law_sweep: gamma outside (0, 1]");
  std::vector<TrialMetrics> samples;
  samples.reserve(n_ladder.size() * e_grid.size() * static_cast<size_t>(trials));
  for (int n : n_ladder) {
    ensemble::EnsembleSpec spec = base;
    spec.n = n;
    spec.validate();
    const double eta = std::pow(static_cast<double>(n), -1.0 + gamma);
    for (double e : e_grid) {
      if (std::abs(e) > n)
        throw std::invalid_argument("local_law_sweep: |E| exceeds N");
      for (int t = 0; t < trials; ++t)
        samples.push_back(sweep_one(
            spec, trial_offset + static_cast<std::uint64_t>(t), e, eta));
    }
  }
  return aggregate_sweep(std::move(samples), gamma);
}

}  // namespace locallaw::bootstrap
