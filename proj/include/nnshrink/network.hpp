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

#ifndef NNSHRINK_NETWORK_HPP_
#define NNSHRINK_NETWORK_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nnshrink {

// Thrown for malformed user input: bad files, dimension mismatches,
// violated operation preconditions. The CLI maps it to exit code 2.
struct InputError : std::runtime_error {
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when an internal invariant breaks. CLI exit code 3.
struct InternalError : std::logic_error {
  explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

// Interior piecewise-linear breakpoints must be continuous up to this
// absolute tolerance; the redundancy arguments assume the function value
// is unambiguous at segment boundaries.
inline constexpr double kContinuityTol = 1e-9;

// Relative tolerance for "functionally identical" claims after graph
// surgery (sums get reordered, nothing more).
inline constexpr double kEquivRelTol = 1e-6;

struct NeuronRef {
  int layer = 0;
  int index = 0;
  friend auto operator<=>(const NeuronRef&, const NeuronRef&) = default;
};

std::string to_string(const NeuronRef& ref);

// A continuous piecewise-linear function. Segment i covers
// [breakpoints[i], breakpoints[i+1]) with value slopes[i]*x + intercepts[i];
// the last segment is closed on the right. breakpoints.front() may be -inf
// and breakpoints.back() +inf. Finite end breakpoints extend their outermost
// piece, so evaluation is total.
struct PwlFn {
  std::vector<double> breakpoints;  // size k+1, strictly increasing
  std::vector<double> slopes;       // size k
  std::vector<double> intercepts;   // size k

  static PwlFn relu();
  bool is_relu() const;

  int piece_count() const { return static_cast<int>(slopes.size()); }
  double operator()(double x) const;

  // Index of the segment owning x under the half-open convention.
  int segment_of(double x) const;

  // Lowest segment whose closed span [s_i, s_{i+1}] contains [lo, hi],
  // or nullopt. Closed containment is sound because of continuity.
  std::optional<int> segment_containing(double lo, double hi) const;

  // Exact value range over [lo, hi] (endpoints plus interior breakpoints).
  std::pair<double, double> range_on(double lo, double hi) const;

  double max_slope() const;
  double min_slope() const;
  double max_abs_slope() const;
};

struct Term {
  NeuronRef source;
  double coeff = 0.0;
};

struct Neuron {
  enum class Kind { kInput, kWeightedSum, kActivation };

  Kind kind = Kind::kInput;
  // Weighted sum: value = bias + sum(coeff * source value).
  double bias = 0.0;
  std::vector<Term> terms;
  // Activation: value = fn(source value).
  NeuronRef source;
  PwlFn fn;
  // Stable identity that survives surgery and re-indexing. Not serialized.
  std::int64_t id = -1;

  static Neuron input();
  static Neuron weighted_sum(double bias, std::vector<Term> terms);
  static Neuron activation(NeuronRef source, PwlFn fn);
};

// Per-layer values of one evaluation.
struct LayerTrace {
  std::vector<std::vector<double>> values;

  double at(const NeuronRef& ref) const { return values[ref.layer][ref.index]; }
  const std::vector<double>& outputs() const { return values.back(); }
};

// y = matrix * x + offset.
struct AffineMap {
  std::vector<std::vector<double>> matrix;  // output_dim x input_dim
  std::vector<double> offset;               // output_dim

  std::vector<double> apply(const std::vector<double>& x) const;
  int output_dim() const { return static_cast<int>(offset.size()); }
  int input_dim() const {
    return matrix.empty() ? 0 : static_cast<int>(matrix.front().size());
  }
};

// A layered DAG of neurons. Layer 0 holds the inputs, the last layer holds
// weighted-sum outputs, and every reference points to a strictly earlier
// layer. Values are immutable in spirit: all operations below return new
// networks, so sharing a const Network across threads is safe.
struct Network {
  std::vector<std::vector<Neuron>> layers;
  std::string name;
  std::map<std::string, std::string> metadata;
  std::int64_t next_id = 0;

  int layer_count() const { return static_cast<int>(layers.size()); }
  int layer_size(int layer) const {
    return static_cast<int>(layers[layer].size());
  }
  int input_dim() const { return layer_size(0); }
  int output_dim() const { return layer_size(layer_count() - 1); }
  int neuron_count() const;
  int hidden_count() const;

  bool contains(const NeuronRef& ref) const;
  const Neuron& at(const NeuronRef& ref) const;
  Neuron& at(const NeuronRef& ref);

  // Assigns fresh stable ids to every neuron (builders call this once).
  void assign_ids();
  std::optional<NeuronRef> find_by_id(std::int64_t id) const;
};

struct Violation {
  NeuronRef where;
  std::string message;
};

// --- Core operations ------------------------------------------------------

LayerTrace evaluate(const Network& net, const std::vector<double>& input);

std::vector<Violation> validate(const Network& net);

// Refs of every neuron that lists `ref` as a source.
std::vector<NeuronRef> consumers_of(const Network& net, const NeuronRef& ref);

// Removes weighted-sum neuron v by substituting its sum into every consumer
// (all of which must be weighted sums). Coefficients landing on the same
// source are merged. Empty layers are dropped and all refs re-indexed; the
// renumbering is appended to metadata["surgery"].
Network eliminate_ws_neuron(const Network& net, const NeuronRef& v);

// Turns activation neuron v into the weighted sum a*x + b of its source.
Network replace_activation(const Network& net, const NeuronRef& v, double a,
                           double b);

// Repeats eliminate_ws_neuron over every eligible hidden weighted-sum
// neuron until none remains, then splits any layer left with mixed neuron
// kinds so the result is serializable again.
Network saturate_ws_elimination(const Network& net);

// Exact affine collapse, or nullopt if any activation survives saturation.
std::optional<AffineMap> to_affine(const Network& net);

}  // namespace nnshrink

#endif  // NNSHRINK_NETWORK_HPP_
