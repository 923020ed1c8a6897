// Copyright 2026 The nnshrink Authors
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

#ifndef NNSHRINK_RNG_HPP_
#define NNSHRINK_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <vector>

#include "nnshrink/bounds.hpp"

namespace nnshrink {

// splitmix64-based generator. Hand-rolled on purpose: results must be
// byte-reproducible across platforms, which std::uniform_real_distribution
// does not promise.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (deterministic, no cached spare).
  double normal();

  std::vector<double> in_box(const Box& box) {
    std::vector<double> x(box.dim());
    for (int d = 0; d < box.dim(); ++d)
      x[d] = uniform(box.dims[d].lo, box.dims[d].hi);
    return x;
  }

 private:
  std::uint64_t state_;
};

inline double Rng::normal() {
  // Avoid log(0).
  double u1 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace nnshrink

#endif  // NNSHRINK_RNG_HPP_
