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

// Wigner matrix ensembles.
//
// An N x N Wigner matrix here is Hermitian with independent upper-triangular
// entries of mean 0 and variance 1/N off the diagonal (the diagonal variance
// is diag_variance_factor / N, defaulting to the GUE/GOE conventions).  The
// scaled entries sqrt(N) H_ij are bounded in every L^p, which the moment
// audit spot-checks against closed-form targets.
//
// Sampling is deterministic: entry (i,j) of trial t is a pure function of
// (master_seed, t, i, j), so two processes produce bitwise-identical
// matrices and individual entries can be re-drawn in isolation.

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "locallaw/rng.hpp"

namespace locallaw::ensemble {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

// Configuration cap: dense eigendecompositions stay at desk scale.
inline constexpr int kMaxN = 4096;

enum class LawKind {
  complex_gaussian,   // (g1 + i g2)/sqrt(2) off-diagonal (GUE entries)
  real_gaussian,      // standard real gaussian entries
  rademacher_phase,   // unit modulus: random phase (hermitian) or sign
  bounded_uniform,    // uniform on a symmetric interval, scaled to variance 1
  point_mass,         // degenerate test law: every entry exactly 0
};

enum class Symmetry {
  hermitian,       // complex entries off the diagonal
  real_symmetric,  // real entries everywhere
};

struct EntryLaw {
  LawKind kind = LawKind::complex_gaussian;
  // Variance of sqrt(N) * H_ii.  0 means "class default": 1 for hermitian
  // (GUE), 2 for real-symmetric (GOE).
  double diag_variance_factor = 0.0;

  double effective_diag_factor(Symmetry s) const {
    if (diag_variance_factor > 0.0) return diag_variance_factor;
    return s == Symmetry::real_symmetric ? 2.0 : 1.0;
  }
};

struct EnsembleSpec {
  int n = 0;
  EntryLaw law;
  Symmetry symmetry = Symmetry::hermitian;
  std::uint64_t master_seed = 1;

  void validate() const {
    if (n < 1 || n > kMaxN)
      throw std::invalid_argument("EnsembleSpec: n must be in [1, " +
                                  std::to_string(kMaxN) + "], got " +
                                  std::to_string(n));
    if (law.diag_variance_factor < 0.0)
      throw std::invalid_argument("EnsembleSpec: diag_variance_factor must be >= 0");
  }
};

struct WignerMatrix {
  Matrix h;
  EnsembleSpec spec;
  std::uint64_t trial = 0;
  int n() const { return static_cast<int>(h.rows()); }
};

namespace detail {

inline std::uint64_t entry_key(int i, int j) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(i)) << 32) |
         static_cast<std::uint64_t>(static_cast<std::uint32_t>(j));
}

// Unscaled off-diagonal draw: E = 0, E|.|^2 = 1 (except point_mass).
inline Complex draw_offdiag_unit(rng::Stream& st, LawKind kind, Symmetry sym) {
  const bool complex_entries = (sym == Symmetry::hermitian);
  switch (kind) {
    case LawKind::complex_gaussian: {
      auto [g1, g2] = st.next_gaussian_pair();
      if (complex_entries) return Complex(g1, g2) / std::sqrt(2.0);
      return Complex(g1, 0.0);
    }
    case LawKind::real_gaussian: {
      auto [g1, g2] = st.next_gaussian_pair();
      (void)g2;  // fixed word consumption regardless of use
      return Complex(g1, 0.0);
    }
    case LawKind::rademacher_phase: {
      const double u = st.next_unit();
      if (complex_entries) {
        const double t = 2.0 * std::numbers::pi * u;
        return Complex(std::cos(t), std::sin(t));
      }
      return Complex(u < 0.5 ? -1.0 : 1.0, 0.0);
    }
    case LawKind::bounded_uniform: {
      if (complex_entries) {
        const double a = st.next_symmetric();
        const double b = st.next_symmetric();
        return std::sqrt(1.5) * Complex(a, b);
      }
      return Complex(std::sqrt(3.0) * st.next_symmetric(), 0.0);
    }
    case LawKind::point_mass:
      return Complex(0.0, 0.0);
  }
  return Complex(0.0, 0.0);
}

// Unscaled diagonal draw: real, E = 0, E(.)^2 = diag_factor.
inline double draw_diag_unit(rng::Stream& st, LawKind kind, double diag_factor) {
  const double s = std::sqrt(diag_factor);
  switch (kind) {
    case LawKind::complex_gaussian:
    case LawKind::real_gaussian: {
      auto [g1, g2] = st.next_gaussian_pair();
      (void)g2;
      return s * g1;
    }
    case LawKind::rademacher_phase:
      return st.next_unit() < 0.5 ? -s : s;
    case LawKind::bounded_uniform:
      return std::sqrt(3.0) * s * st.next_symmetric();
    case LawKind::point_mass:
      return 0.0;
  }
  return 0.0;
}

}  // namespace detail

// Draw entry (i,j), i <= j, from a caller-supplied stream.  Used directly by
// conditional-resampling code that re-draws rows under its own key schedule.
inline Complex draw_entry_with_stream(const EnsembleSpec& spec, rng::Stream& st,
                                      int i, int j) {
  if (i > j) throw std::invalid_argument("draw_entry_with_stream: need i <= j");
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.n));
  if (i == j) {
    const double d = detail::draw_diag_unit(
        st, spec.law.kind, spec.law.effective_diag_factor(spec.symmetry));
    return Complex(d * scale, 0.0);
  }
  return detail::draw_offdiag_unit(st, spec.law.kind, spec.symmetry) * scale;
}

// Draw entry (i,j), i <= j, of trial `trial` in isolation.  sample_wigner is
// defined as the assembly of exactly these values, so audits can re-derive
// any entry without building the matrix.
inline Complex draw_entry(const EnsembleSpec& spec, std::uint64_t trial, int i, int j) {
  if (i > j) throw std::invalid_argument("draw_entry: need i <= j");
  rng::Stream st(rng::derive(spec.master_seed, trial,
                             static_cast<std::uint64_t>(rng::Tag::matrix),
                             detail::entry_key(i, j)));
  return draw_entry_with_stream(spec, st, i, j);
}

// Sample one matrix.  Hermiticity is bit-level: H(j,i) is stored as the
// exact conjugate of the drawn H(i,j).
inline WignerMatrix sample_wigner(const EnsembleSpec& spec, std::uint64_t trial) {
  spec.validate();
  const int n = spec.n;
  WignerMatrix w;
  w.spec = spec;
  w.trial = trial;
  w.h.resize(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const Complex v = draw_entry(spec, trial, i, j);
      w.h(i, j) = v;
      if (j != i) w.h(j, i) = std::conj(v);
    }
  }
  return w;
}

// H with entries (i,j) and (j,i) replaced by zero.
inline Matrix minor_of(const Matrix& h, int i, int j) {
  Matrix m = h;
  m(i, j) = Complex(0, 0);
  m(j, i) = Complex(0, 0);
  return m;
}

inline WignerMatrix zero_entry_minor(const WignerMatrix& w, int i, int j) {
  if (i < 0 || j < 0 || i >= w.n() || j >= w.n())
    throw std::invalid_argument("zero_entry_minor: index out of range");
  WignerMatrix m = w;
  m.h = minor_of(w.h, i, j);
  return m;
}

// Delta = H - H^(ij): at most two nonzero entries, kept in factored form so
// products G * Delta * G' cost O(N^2).
struct RankTwoPerturbation {
  int n = 0;
  int i = 0;
  int j = 0;
  Complex value{0.0, 0.0};  // H(i,j); the (j,i) entry is its conjugate

  bool rank_at_most_one() const { return i == j || value == Complex(0, 0); }

  RankTwoPerturbation negated() const { return {n, i, j, -value}; }

  Eigen::MatrixXcd dense() const {
    Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(n, n);
    d(i, j) = value;
    if (i != j) d(j, i) = std::conj(value);
    return d;
  }

  // left * Delta * right via rank-structure: O(N^2).
  Eigen::MatrixXcd sandwich(const Eigen::MatrixXcd& left,
                            const Eigen::MatrixXcd& right) const {
    if (left.cols() != n || right.rows() != n)
      throw std::invalid_argument("RankTwoPerturbation::sandwich: dimension mismatch");
    Eigen::MatrixXcd out = value * (left.col(i) * right.row(j));
    if (i != j) out.noalias() += std::conj(value) * (left.col(j) * right.row(i));
    return out;
  }
};

inline RankTwoPerturbation perturbation(const WignerMatrix& w, int i, int j) {
  if (i < 0 || j < 0 || i >= w.n() || j >= w.n())
    throw std::invalid_argument("perturbation: index out of range");
  return RankTwoPerturbation{w.n(), i, j, w.h(i, j)};
}

// ---------------------------------------------------------------------------
// Moment audit: Monte Carlo estimates of entry moments vs closed-form targets.
// ---------------------------------------------------------------------------

struct MomentEstimate {
  double estimate = 0.0;
  double stderror = 0.0;
  double target = 0.0;
  bool has_target = true;
  bool flagged = false;  // |estimate - target| > 4 stderr
};

struct MomentReport {
  int p = 0;
  int trials = 0;
  MomentEstimate off_mean_re;   // mean of Re sqrt(N) H_01, target 0
  MomentEstimate off_mean_im;   // mean of Im sqrt(N) H_01, target 0
  MomentEstimate off_abs_p;     // E |sqrt(N) H_01|^p
  MomentEstimate diag_abs_p;    // E |sqrt(N) H_00|^p
  bool degenerate_law = false;  // point-mass: moments 0 by construction

  bool any_flagged() const {
    return off_mean_re.flagged || off_mean_im.flagged || off_abs_p.flagged ||
           diag_abs_p.flagged;
  }
};

namespace detail {

inline double double_factorial_odd(int p) {  // (p-1)!! for even p
  double r = 1.0;
  for (int k = p - 1; k > 1; k -= 2) r *= k;
  return r;
}

inline double factorial(int m) {
  double r = 1.0;
  for (int k = 2; k <= m; ++k) r *= k;
  return r;
}

inline double binomial(int n, int k) {
  double r = 1.0;
  for (int t = 1; t <= k; ++t) r *= static_cast<double>(n - k + t) / t;
  return r;
}

// Closed-form E |x|^p for the unscaled off-diagonal law, p even.
inline double offdiag_moment_target(LawKind kind, Symmetry sym, int p) {
  const int m = p / 2;
  const bool complex_entries = (sym == Symmetry::hermitian);
  switch (kind) {
    case LawKind::complex_gaussian:
      if (complex_entries) return factorial(m);  // E|g_c|^(2m) = m!
      return double_factorial_odd(p);
    case LawKind::real_gaussian:
      return double_factorial_odd(p);  // (p-1)!!
    case LawKind::rademacher_phase:
      return 1.0;
    case LawKind::bounded_uniform: {
      if (!complex_entries) {
        // E (sqrt(3) u)^p, u ~ U[-1,1): 3^m / (p+1)
        return std::pow(3.0, m) / (p + 1);
      }
      // E (a^2+b^2)^m, a,b ~ U(-c,c) with c^2 = 3/2: E a^(2j) = c^(2j)/(2j+1)
      double total = 0.0;
      for (int j = 0; j <= m; ++j) {
        const double ea = std::pow(1.5, j) / (2 * j + 1);
        const double eb = std::pow(1.5, m - j) / (2 * (m - j) + 1);
        total += binomial(m, j) * ea * eb;
      }
      return total;
    }
    case LawKind::point_mass:
      return 0.0;
  }
  return 0.0;
}

// Closed-form E |d|^p for the unscaled diagonal law (variance diag_factor).
inline double diag_moment_target(LawKind kind, double diag_factor, int p) {
  const int m = p / 2;
  const double c = std::pow(diag_factor, m);
  switch (kind) {
    case LawKind::complex_gaussian:
    case LawKind::real_gaussian:
      return c * double_factorial_odd(p);
    case LawKind::rademacher_phase:
      return c;
    case LawKind::bounded_uniform:
      return std::pow(3.0 * diag_factor, m) / (p + 1);
    case LawKind::point_mass:
      return 0.0;
  }
  return 0.0;
}

inline MomentEstimate finish(double sum, double sumsq, int t, double target) {
  MomentEstimate e;
  const double mean = sum / t;
  const double var = std::max(0.0, sumsq / t - mean * mean);
  e.estimate = mean;
  e.stderror = std::sqrt(var / t);
  e.target = target;
  e.flagged = std::abs(mean - target) > 4.0 * e.stderror + 1e-300;
  return e;
}

}  // namespace detail

// Estimate entry moments of order p (even, <= 8) over `trials` independent
// trials; the sampled values are bitwise identical to the corresponding
// entries of sample_wigner(spec, t).
inline MomentReport moment_audit(const EnsembleSpec& spec, int p, int trials) {
  spec.validate();
  if (p < 2 || p > 8 || p % 2 != 0)
    throw std::invalid_argument("moment_audit: p must be one of {2,4,6,8}");
  if (trials < 100) throw std::invalid_argument("moment_audit: trials must be >= 100");
  if (spec.n < 2) throw std::invalid_argument("moment_audit: n must be >= 2");

  const double sqn = std::sqrt(static_cast<double>(spec.n));
  double s_re = 0, s_re2 = 0, s_im = 0, s_im2 = 0;
  double s_off = 0, s_off2 = 0, s_diag = 0, s_diag2 = 0;
  for (int t = 0; t < trials; ++t) {
    const Complex off = sqn * draw_entry(spec, static_cast<std::uint64_t>(t), 0, 1);
    const Complex dia = sqn * draw_entry(spec, static_cast<std::uint64_t>(t), 0, 0);
    const double ap = std::pow(std::abs(off), p);
    const double dp = std::pow(std::abs(dia), p);
    s_re += off.real();
    s_re2 += off.real() * off.real();
    s_im += off.imag();
    s_im2 += off.imag() * off.imag();
    s_off += ap;
    s_off2 += ap * ap;
    s_diag += dp;
    s_diag2 += dp * dp;
  }

  MomentReport r;
  r.p = p;
  r.trials = trials;
  r.degenerate_law = (spec.law.kind == LawKind::point_mass);
  r.off_mean_re = detail::finish(s_re, s_re2, trials, 0.0);
  r.off_mean_im = detail::finish(s_im, s_im2, trials, 0.0);
  r.off_abs_p = detail::finish(
      s_off, s_off2, trials,
      detail::offdiag_moment_target(spec.law.kind, spec.symmetry, p));
  r.diag_abs_p = detail::finish(
      s_diag, s_diag2, trials,
      detail::diag_moment_target(spec.law.kind,
                                 spec.law.effective_diag_factor(spec.symmetry), p));
  return r;
}

// ---------------------------------------------------------------------------
// Debug dump: magic "WIGM1", N as 64-bit little-endian, then row-major
// interleaved (re, im) doubles.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u64_le(std::ofstream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64_le(std::ifstream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
  return v;
}

inline void put_f64_le(std::ofstream& out, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64_le(out, v);
}

inline double get_f64_le(std::ifstream& in) {
  const std::uint64_t v = get_u64_le(in);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

}  // namespace detail

inline void save_wigm1(const std::string& path, const Matrix& h) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_wigm1: cannot open " + path);
  out.write("WIGM1", 5);
  detail::put_u64_le(out, static_cast<std::uint64_t>(h.rows()));
  for (Eigen::Index i = 0; i < h.rows(); ++i)
    for (Eigen::Index j = 0; j < h.cols(); ++j) {
      detail::put_f64_le(out, h(i, j).real());
      detail::put_f64_le(out, h(i, j).imag());
    }
  if (!out) throw std::runtime_error("save_wigm1: write failed for " + path);
}

inline Matrix load_wigm1(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_wigm1: cannot open " + path);
  char magic[5];
  in.read(magic, 5);
  if (!in || std::memcmp(magic, "WIGM1", 5) != 0)
    throw std::runtime_error("load_wigm1: bad magic in " + path);
  const std::uint64_t n64 = detail::get_u64_le(in);
  if (n64 == 0 || n64 > static_cast<std::uint64_t>(kMaxN))
    throw std::runtime_error("load_wigm1: implausible dimension in " + path);
  const int n = static_cast<int>(n64);
  Matrix h(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double re = detail::get_f64_le(in);
      const double im = detail::get_f64_le(in);
      h(i, j) = Complex(re, im);
    }
  if (!in) throw std::runtime_error("load_wigm1: truncated file " + path);
  return h;
}

// String names used by configs and result records.
inline std::string to_string(LawKind k) {
  switch (k) {
    case LawKind::complex_gaussian: return "complex-gaussian";
    case LawKind::real_gaussian: return "real-gaussian";
    case LawKind::rademacher_phase: return "rademacher-phase";
    case LawKind::bounded_uniform: return "bounded-uniform";
    case LawKind::point_mass: return "point-mass";
  }
  return "?";
}

inline std::string to_string(Symmetry s) {
  return s == Symmetry::hermitian ? "hermitian" : "real-symmetric";
}

inline LawKind law_from_string(const std::string& s) {
  if (s == "complex-gaussian") return LawKind::complex_gaussian;
  if (s == "real-gaussian") return LawKind::real_gaussian;
  if (s == "rademacher-phase") return LawKind::rademacher_phase;
  if (s == "bounded-uniform") return LawKind::bounded_uniform;
  if (s == "point-mass") return LawKind::point_mass;
  throw std::invalid_argument("unknown entry law: " + s);
}

inline Symmetry symmetry_from_string(const std::string& s) {
  if (s == "hermitian") return Symmetry::hermitian;
  if (s == "real-symmetric") return Symmetry::real_symmetric;
  throw std::invalid_argument("unknown symmetry class: " + s);
}

}  // namespace locallaw::ensemble
