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

// Resolvents and their exact algebra.
//
// For Hermitian H and z = E + i eta (eta > 0), G(z) = (H - z)^(-1).  One
// eigendecomposition per matrix is reused across all z (two matrix products
// per evaluation); a direct LU solve is kept as an independent oracle.
//
// The module also evaluates, to machine precision, the identities every
// downstream statistic relies on:
//   * Ward:            sum_j |G_ij|^2 = Im G_ii / eta,
//   * resolvent:       G~ = G - G Delta G~       (H~ = H + Delta),
//   * finite expansion G~ = sum_{t<k} G(-Delta G)^t + G~(-Delta G)^k,
//   * first row:       1 + z G_11 = sum_i H_1i G_i1,
// and computes "minor" resolvents -- H with one symmetric entry pair zeroed
// -- through a factored rank-<=2 (Woodbury) update in O(N^2) per index, with
// a dense-solve fallback if the 2x2 capacitance system is ever singular.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "locallaw/ensemble.hpp"

namespace locallaw::spectral {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using ensemble::RankTwoPerturbation;

struct SpectralPoint {
  double e = 0.0;
  double eta = 0.0;
  Complex z() const { return Complex(e, eta); }
  double abs_z() const { return std::abs(z()); }
  double psi(int n) const { return 1.0 / std::sqrt(n * eta); }
};

// The admissible spectral window: |E| <= N and N^(-1+gamma) <= eta <= N.
inline bool domain_s_contains(SpectralPoint p, int n, double gamma) {
  const double lo = std::pow(static_cast<double>(n), -1.0 + gamma);
  return std::abs(p.e) <= n && p.eta >= lo && p.eta <= static_cast<double>(n);
}

struct SpectralDecomposition {
  Matrix h;                      // the decomposed matrix (kept for minors)
  Eigen::VectorXd eigenvalues;   // descending
  Matrix eigenvectors;           // columns ordered to match
  double reconstruction_error = 0.0;  // max-entry |U L U* - H|
  double unitarity_error = 0.0;       // max-entry |U* U - I|
  int n() const { return static_cast<int>(eigenvalues.size()); }
};

// Full eigendecomposition with invariant certificates.  Cost: one O(N^3)
// solve plus three O(N^3) products for the certificates.
inline SpectralDecomposition decompose(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("decompose: eigensolver failed to converge");
  const int n = static_cast<int>(h.rows());
  SpectralDecomposition dec;
  dec.h = h;
  dec.eigenvalues = solver.eigenvalues().reverse();
  dec.eigenvectors.resize(n, n);
  for (int k = 0; k < n; ++k)
    dec.eigenvectors.col(k) = solver.eigenvectors().col(n - 1 - k);
  Matrix scaled = dec.eigenvectors * dec.eigenvalues.cast<Complex>().asDiagonal();
  dec.reconstruction_error =
      (scaled * dec.eigenvectors.adjoint() - h).cwiseAbs().maxCoeff();
  dec.unitarity_error = (dec.eigenvectors.adjoint() * dec.eigenvectors -
                         Matrix::Identity(n, n))
                            .cwiseAbs()
                            .maxCoeff();
  return dec;
}

// Spectrum only (no vectors, no certificates); for eigenvalue statistics.
inline Eigen::VectorXd eigenvalues_only(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("eigenvalues_only: eigensolver failed to converge");
  return solver.eigenvalues().reverse();
}

// G(z) from the decomposition: U diag(1/(lambda - z)) U*.
inline Matrix resolvent(const SpectralDecomposition& dec, SpectralPoint p) {
  if (!(p.eta > 0.0)) throw std::invalid_argument("resolvent: eta must be positive");
  const int n = dec.n();
  Eigen::VectorXcd d(n);
  const Complex z = p.z();
  for (int k = 0; k < n; ++k) d(k) = 1.0 / (dec.eigenvalues(k) - z);
  Matrix scaled = dec.eigenvectors * d.asDiagonal();
  Matrix g(n, n);
  g.noalias() = scaled * dec.eigenvectors.adjoint();
  return g;
}

// Independent oracle: dense LU solve of (H - z) G = I.
inline Matrix resolvent_direct(const Matrix& h, SpectralPoint p) {
  if (!(p.eta > 0.0))
    throw std::invalid_argument("resolvent_direct: eta must be positive");
  const int n = static_cast<int>(h.rows());
  Matrix shifted = h;
  shifted.diagonal().array() -= p.z();
  return shifted.partialPivLu().solve(Matrix::Identity(n, n));
}

struct WardReport {
  double max_rel = 0.0;
  Eigen::VectorXd per_row;
};

// Relative residual of sum_j |G_ij|^2 = Im G_ii / eta, per row.
inline WardReport ward_residual(const Matrix& g, double eta) {
  const int n = static_cast<int>(g.rows());
  WardReport rep;
  rep.per_row.resize(n);
  for (int i = 0; i < n; ++i) {
    const double lhs = g.row(i).squaredNorm();
    const double rhs = g(i, i).imag() / eta;
    rep.per_row(i) = std::abs(lhs - rhs) / lhs;
    rep.max_rel = std::max(rep.max_rel, rep.per_row(i));
  }
  return rep;
}

// Residual of G~ = G - G Delta G~ where Delta = H~ - H, factored form.
inline double resolvent_identity_residual(const Matrix& g, const Matrix& g_tilde,
                                          const RankTwoPerturbation& delta) {
  return (g_tilde - g + delta.sandwich(g, g_tilde)).cwiseAbs().maxCoeff();
}

// Same residual with an arbitrary dense perturbation.
inline double resolvent_identity_residual(const Matrix& g, const Matrix& g_tilde,
                                          const Matrix& delta) {
  return (g_tilde - g + g * delta * g_tilde).cwiseAbs().maxCoeff();
}

// Residual of the order-k expansion with exact remainder:
//   G~ = sum_{t=0}^{k-1} G (-Delta G)^t + G~ (-Delta G)^k.
inline double expansion_remainder(const Matrix& g, const Matrix& g_tilde,
                                  const RankTwoPerturbation& delta, int k) {
  if (k < 1) throw std::invalid_argument("expansion_remainder: k must be >= 1");
  const int n = static_cast<int>(g.rows());
  const Matrix a = -(delta.dense() * g);
  Matrix apow = Matrix::Identity(n, n);
  Matrix series = Matrix::Zero(n, n);
  for (int t = 0; t < k; ++t) {
    series += apow;
    apow = (a * apow).eval();
  }
  return (g_tilde - g * series - g_tilde * apow).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Minor resolvents: G^(1i) = resolvent of H with entries (0,i), (i,0) zeroed.
//
// Writing Delta = H - H^(1i) = E S E* with E = [e_0, e_i] and
// S = [[0, a], [conj a, 0]], a = H_0i, the Woodbury identity gives
//   G^(1i) = G + (G E) S K^{-1} (E* G),   K = I_2 - (E* G E) S.
// All pieces are O(1) reads from G, the full update is O(N^2), and a single
// entry of G^(1i) is O(1) -- which the Efron-Stein statistics exploit.
// ---------------------------------------------------------------------------

struct MinorUpdate {
  int i = 0;
  bool rank1 = false;       // i == 0: single real diagonal entry
  bool invertible = true;   // capacitance comfortably nonsingular
  Eigen::Matrix2cd sk;      // S K^{-1} (2x2); rank-1 case stores the scalar at (0,0)
};

// Capacitance pieces for zeroing the (0,i)/(i,0) pair of the matrix behind g.
inline MinorUpdate minor_update_pieces(const Matrix& h, const Matrix& g, int i) {
  MinorUpdate up;
  up.i = i;
  up.sk.setZero();
  if (i == 0) {
    up.rank1 = true;
    const Complex a = h(0, 0);
    const Complex k = 1.0 - g(0, 0) * a;
    up.invertible = std::abs(k) > 1e-12 * std::max(1.0, std::abs(g(0, 0) * a));
    if (up.invertible) up.sk(0, 0) = a / k;
    return up;
  }
  const Complex a = h(0, i);
  Eigen::Matrix2cd s;
  s << Complex(0, 0), a, std::conj(a), Complex(0, 0);
  Eigen::Matrix2cd w;
  w << g(0, 0), g(0, i), g(i, 0), g(i, i);
  const Eigen::Matrix2cd k = Eigen::Matrix2cd::Identity() - w * s;
  // Smallest singular value from the closed 2x2 form.
  const double t = k.squaredNorm();
  const double d2 = std::norm(k.determinant());
  const double smin2 = 0.5 * (t - std::sqrt(std::max(0.0, t * t - 4.0 * d2)));
  up.invertible = std::sqrt(std::max(0.0, smin2)) > 1e-12 * std::max(1.0, std::sqrt(t));
  if (up.invertible) up.sk = s * k.inverse();
  return up;
}

// Single entry of G^(1i) from the factored update (requires up.invertible).
inline Complex minor_entry(const Matrix& g, const MinorUpdate& up, int k, int l) {
  const int i = up.i;
  if (up.rank1) return g(k, l) + g(k, 0) * up.sk(0, 0) * g(0, l);
  const Complex b0 = g(k, 0), b1 = g(k, i);
  const Complex c0 = g(0, l), c1 = g(i, l);
  return g(k, l) + b0 * (up.sk(0, 0) * c0 + up.sk(0, 1) * c1) +
         b1 * (up.sk(1, 0) * c0 + up.sk(1, 1) * c1);
}

struct MinorResolvent {
  Matrix g;
  bool fallback = false;  // dense recomputation was used
};

// Full N x N minor resolvent G^(1i) at the same z as g (g = resolvent of h).
inline MinorResolvent minor_resolvent(const Matrix& h, const Matrix& g, int i,
                                      SpectralPoint p) {
  const int n = static_cast<int>(h.rows());
  if (i < 0 || i >= n) throw std::invalid_argument("minor_resolvent: index out of range");
  MinorResolvent out;
  const MinorUpdate up = minor_update_pieces(h, g, i);
  if (!up.invertible) {
    out.fallback = true;
    out.g = resolvent_direct(ensemble::minor_of(h, 0, i), p);
    return out;
  }
  if (up.rank1) {
    out.g = g + up.sk(0, 0) * (g.col(0) * g.row(0));
    return out;
  }
  Eigen::MatrixXcd b(n, 2), c(2, n);
  b.col(0) = g.col(0);
  b.col(1) = g.col(i);
  c.row(0) = g.row(0);
  c.row(1) = g.row(i);
  out.g = g;
  out.g.noalias() += b * (up.sk * c);
  return out;
}

// Residual of the exact first-row relation 1 + z G_rr = sum_i H_ri G_ir.
inline double row_identity_residual(const Matrix& h, const Matrix& g, SpectralPoint p,
                                    int row = 0) {
  const int n = static_cast<int>(h.rows());
  if (row < 0 || row >= n)
    throw std::invalid_argument("row_identity_residual: row out of range");
  Complex acc(0, 0);
  for (int i = 0; i < n; ++i) acc += h(row, i) * g(i, row);
  return std::abs(1.0 + p.z() * g(row, row) - acc);
}

struct ResolventStats {
  Complex s{0, 0};            // (1/N) sum_j G_jj
  double gamma_val = 1.0;     // max_kl |G_kl|, floored at 1
  double offdiag_max = 0.0;   // max_{i != j} |G_ij|
  double diag_err_max = 0.0;  // max_i |G_ii - m|
};

inline ResolventStats stats(const Matrix& g, Complex m_value) {
  const int n = static_cast<int>(g.rows());
  ResolventStats st;
  double entry_max = 0.0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const double a = std::abs(g(i, j));
      entry_max = std::max(entry_max, a);
      if (i != j) st.offdiag_max = std::max(st.offdiag_max, a);
    }
    st.s += g(j, j);
    st.diag_err_max = std::max(st.diag_err_max, std::abs(g(j, j) - m_value));
  }
  st.s /= static_cast<double>(n);
  st.gamma_val = std::max(entry_max, 1.0);
  return st;
}

// Max-entry magnitude floored at 1 (the Gamma error parameter).
inline double gamma_of(const Matrix& g) {
  return std::max(g.cwiseAbs().maxCoeff(), 1.0);
}

// ---------------------------------------------------------------------------
// Gamma* = sup over eta' >= eta of Gamma(E + i eta'), approximated on a
// geometric grid anchored at eta_max and descending to eta.  grid_sup is the
// plain grid supremum; certified adds the Lipschitz slack
// max_j (step_j / eta_lower^2), valid because |d G_kl / d eta| = |(G^2)_kl|
// <= 1/eta^2.  Anchoring the grid at eta_max makes both fields monotone
// nonincreasing in eta by construction (grids for smaller eta extend grids
// for larger eta).
// ---------------------------------------------------------------------------

struct GammaStarBound {
  double grid_sup = 0.0;
  double slack = 0.0;
  int points = 0;
  double certified() const { return grid_sup + slack; }
};

// Grid of eta values from eta_max down to eta with ratio <= `ratio`.
inline std::vector<double> gamma_grid(double eta, double eta_max, double ratio = 1.05) {
  if (!(eta > 0.0) || eta > eta_max)
    throw std::invalid_argument("gamma_grid: need 0 < eta <= eta_max");
  if (!(ratio > 1.0)) throw std::invalid_argument("gamma_grid: ratio must exceed 1");
  std::vector<double> etas;
  for (double x = eta_max; x > eta * (1.0 + 1e-12); x /= ratio) etas.push_back(x);
  etas.push_back(eta);
  return etas;
}

inline GammaStarBound gamma_star(const SpectralDecomposition& dec, double e,
                                 double eta, double eta_max, double ratio = 1.05) {
  const std::vector<double> etas = gamma_grid(eta, eta_max, ratio);
  GammaStarBound out;
  out.points = static_cast<int>(etas.size());
  for (size_t j = 0; j < etas.size(); ++j) {
    out.grid_sup = std::max(out.grid_sup, gamma_of(resolvent(dec, {e, etas[j]})));
    if (j + 1 < etas.size()) {
      const double step = etas[j] - etas[j + 1];
      out.slack = std::max(out.slack, step / (etas[j + 1] * etas[j + 1]));
    }
  }
  return out;
}

}  // namespace locallaw::spectral
