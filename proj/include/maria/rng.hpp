// Copyright 2026 The MARIA Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "maria/errors.hpp"

namespace maria {

/// Deterministic random stream. All distributions are hand-rolled on top of
/// mt19937_64 so that a given seed produces the same draws on every platform,
/// independent of the standard library's <random> distribution internals.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of randomness.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n).
  int uniform_int(int n) {
    if (n <= 0) throw ContractError("Rng::uniform_int: n must be positive");
    return static_cast<int>(engine_() % static_cast<uint64_t>(n));
  }

  /// Standard normal via Box-Muller (no cached spare; two uniforms per draw).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  /// Gamma(alpha, 1) via Marsaglia-Tsang squeeze; alpha < 1 handled by the
  /// usual boost Gamma(alpha+1) * U^(1/alpha).
  double gamma(double alpha) {
    if (alpha <= 0.0) throw ContractError("Rng::gamma: alpha must be positive");
    if (alpha < 1.0) {
      double u = uniform();
      if (u <= 0.0) u = 0x1.0p-53;
      return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
    }
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double t = 1.0 + c * x;
      if (t <= 0.0) continue;
      double v = t * t * t;
      double u = uniform();
      double x2 = x * x;
      if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x2 + d - d * v + d * std::log(v)) {
        return d * v;
      }
    }
  }

  /// Beta(a, b) as Ga/(Ga+Gb).
  double beta(double a, double b) {
    double x = gamma(a);
    double y = gamma(b);
    double s = x + y;
    if (s <= 0.0) return 0.5;
    return x / s;
  }

  /// Derive an independent stream from this seed and a stream id.
  static Rng fork(uint64_t seed, uint64_t stream) {
    // splitmix64 over the pair keeps streams decorrelated.
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return Rng(z ^ (z >> 31));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace maria
