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

#ifndef NNSHRINK_BOUNDS_HPP_
#define NNSHRINK_BOUNDS_HPP_

#include <map>
#include <vector>

#include "nnshrink/network.hpp"

namespace nnshrink {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  bool contains(double x) const { return lo <= x && x <= hi; }
  Interval intersect(const Interval& other) const;
};

// Per-input-dimension intervals describing the analyzed input domain.
struct Box {
  std::vector<Interval> dims;

  int dim() const { return static_cast<int>(dims.size()); }
  bool contains(const std::vector<double>& x) const;
  // Splits dimension d at its midpoint; first half gets the lower part.
  std::pair<Box, Box> bisect(int d) const;
  int widest_dim() const;
};

// Certified [lb, ub] per neuron, dense over the whole network.
struct BoundsMap {
  std::vector<std::vector<Interval>> intervals;

  const Interval& at(const NeuronRef& ref) const {
    return intervals[ref.layer][ref.index];
  }
  Interval& at(const NeuronRef& ref) {
    return intervals[ref.layer][ref.index];
  }
};

// Sparse affine expression over neuron values plus a constant.
struct LinForm {
  std::map<NeuronRef, double> coeffs;
  double constant = 0.0;

  void add(const NeuronRef& ref, double c);
  void add(const LinForm& other, double scale);
};

enum class BoundBackend { kInterval, kSymbolic };

// Plain layer-by-layer interval arithmetic: weighted sums via sign-split,
// activations via the exact range of the piecewise-linear function over the
// incoming interval.
BoundsMap interval_bounds(const Network& net, const Box& box);

// Symbolic affine envelopes per neuron, concretized over the box.
//
// Every neuron carries a lower and an upper envelope expressed over earlier
// neurons: weighted sums keep their exact expression, stable activations the
// exact segment line, and unstable ones a sound relaxation (for ReLU, the
// standard triangle: the chord above, the tighter boundary piece below).
// Bounding an expression back-substitutes envelopes layer by layer down to
// the inputs, so coefficients that cancel do so before substitution. Results
// are intersected with an interval pass and therefore never looser than
// interval_bounds.
class BoundAnalysis {
 public:
  BoundAnalysis(const Network& net, const Box& box);

  const BoundsMap& bounds() const { return bounds_; }
  Interval bound_of(const NeuronRef& ref) const { return bounds_.at(ref); }

  // Sound interval for an arbitrary linear expression over neuron values.
  Interval bound_linear(const LinForm& form) const;

 private:
  double concretize(const LinForm& form, bool upper) const;

  const Network& net_;
  const Box& box_;
  BoundsMap bounds_;
  // Envelopes indexed like the network layers.
  std::vector<std::vector<LinForm>> lower_;
  std::vector<std::vector<LinForm>> upper_;
};

BoundsMap symbolic_bounds(const Network& net, const Box& box);

// Anytime refinement of symbolic_bounds: deterministically bisects the box
// into `budget` leaves (always the widest dimension of the widest leaf),
// analyzes each leaf, and merges by min/max. The result is intersected with
// the single-box pass, so tighten(1) == symbolic_bounds and the bounds can
// only shrink as the budget grows.
BoundsMap tighten(const Network& net, const Box& box, int budget,
                  BoundBackend backend = BoundBackend::kSymbolic);

// The deterministic leaf decomposition used by tighten; exposed for reuse.
std::vector<Box> bisect_into(const Box& box, int leaves);

}  // namespace nnshrink

#endif  // NNSHRINK_BOUNDS_HPP_
