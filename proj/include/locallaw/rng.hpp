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

// Deterministic, purpose-tagged random streams.
//
// Every random draw in this library is a pure function of
// (master_seed, trial, purpose tag, optional sub-keys).  That gives three
// properties the experiment harness relies on:
//
//   * bitwise reproducibility across processes and thread counts -- results
//     never depend on scheduling, only on the logical coordinates of a draw;
//   * random access -- e.g. the moment audit can redraw the (0,1) matrix
//     entry of trial t without generating the rest of the matrix;
//   * stream independence -- nested loops (outer Monte Carlo trials, inner
//     conditional-expectation resamples) get non-overlapping streams by
//     construction instead of by bookkeeping.
//
// The generator is the splitmix64 counter sequence (Steele, Lea & Flood's
// mixer, the recommended seeder of the xoshiro family).  <random>
// distributions are deliberately not used: their algorithms are
// implementation-defined, which would break the bitwise contract.  The
// Box-Muller transform below is pinned as the one and only normal sampler.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace locallaw::rng {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer: a fast, well-mixed bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// Purpose tags partition the stream space.  Add new tags at the end; the
// numeric values are part of the reproducibility contract.
enum class Tag : std::uint64_t {
  matrix = 1,     // matrix entry draws
  resample = 2,   // conditional-expectation first-row redraws
  panel = 3,      // random index-panel selection
  spectral = 4,   // random spectral points (z choices) in sweeps
  shape = 5,      // per-trial shape choices (sizes, indices, orders)
};

// Absorb a sequence of 64-bit parts into a stream seed (sponge over mix64).
template <typename... Parts>
constexpr std::uint64_t derive(std::uint64_t master, Parts... parts) {
  std::uint64_t h = mix64(master + kGolden);
  ((h = mix64((h + kGolden) ^ static_cast<std::uint64_t>(parts))), ...);
  return h;
}

// Counter-based stream: state advances by the golden gamma, output is the
// mixed counter.  Streams derived from distinct (seed, tag, key) tuples are
// independent for all practical purposes at desk scale.
class Stream {
 public:
  explicit constexpr Stream(std::uint64_t seed) : state_(seed) {}

  constexpr std::uint64_t next_u64() {
    state_ += kGolden;
    return mix64(state_);
  }

  // Uniform double in [0, 1): top 53 bits of the word.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform double in (0, 1]: used where log() must not see zero.
  double next_unit_open() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Pinned normal sampler: one Box-Muller rotation, two words consumed,
  // both variates returned.  (No caching, so word consumption per call is
  // fixed -- part of the determinism contract.)
  std::pair<double, double> next_gaussian_pair() {
    const double u1 = next_unit_open();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(t), r * std::sin(t)};
  }

  // Uniform in [-1, 1).
  double next_symmetric() { return 2.0 * next_unit() - 1.0; }

  // Uniform integer in [0, n) by 128-bit multiply (unbiased enough at desk
  // scale; bias is < 2^-53 for the n used here).
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(next_unit() * static_cast<double>(n));
  }

 private:
  std::uint64_t state_;
};

}  // namespace locallaw::rng
