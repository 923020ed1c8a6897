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

#ifndef NNSHRINK_VERIFY_HPP_
#define NNSHRINK_VERIFY_HPP_

#include <cstdint>
#include <variant>
#include <vector>

#include "nnshrink/bounds.hpp"
#include "nnshrink/network.hpp"

namespace nnshrink {

// Default tolerance for "assigned different values": the definitions speak
// exact arithmetic, floats need a threshold.
inline constexpr double kMismatchTau = 1e-9;

// Slack applied when pruning strict inequalities, never when validating
// witnesses.
inline constexpr double kStrictSlack = 1e-12;

struct PairedNeuron {
  NeuronRef original;
  NeuronRef twin;
};

// A composite network: the layers of the base network, followed by a copy
// of every layer from the replaced neuron's layer onward in which that
// neuron computes a line instead of its activation function. Both suffixes
// read the shared prefix, and `pairs` matches each original suffix neuron
// with its twin.
struct TwinNetwork {
  Network composite;
  NeuronRef replaced;
  int suffix_start = 0;  // first duplicated layer, original indexing

  // pairs[d] lists the pairs of original layer suffix_start + d.
  std::vector<std::vector<PairedNeuron>> pairs;
};

TwinNetwork make_twin(const Network& net, const NeuronRef& v, double a,
                      double b);

enum class Cmp { kLt, kLe, kGt, kGe };

struct LinearConstraint {
  std::vector<Term> terms;  // sum of coeff * value(ref)
  Cmp cmp = Cmp::kLt;
  double rhs = 0.0;
};

// Conjunction of linear inequalities over neuron values.
struct FeasibilityGoal {
  std::vector<LinearConstraint> constraints;
};

// Some pair differs by more than tau (in either direction).
struct LayerMismatchGoal {
  std::vector<PairedNeuron> pairs;
  double tau = kMismatchTau;
};

// Some input has an original winner with margin > delta over the runner-up
// while the twin's argmax (ties to the lowest index) picks someone else.
struct ArgmaxMismatchGoal {
  std::vector<PairedNeuron> outputs;
  double delta = 0.0;
};

using Goal = std::variant<FeasibilityGoal, LayerMismatchGoal, ArgmaxMismatchGoal>;

struct Query {
  Network network;  // plain or twin composite
  Box box;
  Goal goal;
};

struct Verdict {
  enum class Status { kSat, kUnsat, kUnknown };
  Status status = Status::kUnknown;
  std::vector<double> witness;  // SAT only; re-validated by evaluation
  std::int64_t nodes = 0;
  std::int64_t frontier = 0;  // boxes left unexplored on UNKNOWN
};

// The two phase queries for activation v's segment: source < s_i and
// source > s_{i+1}. Infinite endpoints contribute no query. The encoded
// network is truncated right after the source's layer.
std::vector<Query> build_phase_query(const Network& net, const NeuronRef& v,
                                     int segment, const Box& box);

// Mismatch at the k-th weighted-sum layer after v's layer (k = 1 is the
// first one). An UNSAT answer certifies that replacing v with the line
// perturbs at most the layers in between.
Query build_forward_query(const Network& net, const NeuronRef& v, double a,
                          double b, int k, const Box& box,
                          double tau = kMismatchTau);

// Number of weighted-sum layers after `layer`; the last is the output
// layer, so this is the k of a forward query "to the output".
int ws_layers_after(const Network& net, int layer);

Query build_result_preserving_query(const Network& net, const NeuronRef& v,
                                    double a, double b, double delta,
                                    const Box& box);

// Branch-and-bound over the input box; complete up to the node budget.
// Deterministic: nodes are explored lower-half first and candidate
// witnesses probed center-then-faces, so a given query always yields the
// same verdict and witness.
Verdict solve(const Query& query, std::int64_t budget);

// True iff the goal holds at x, by direct evaluation (no slack).
bool goal_holds_at(const Query& query, const std::vector<double>& x);

// Exhaustive test oracle: enumerates every segment assignment, under which
// the network is affine, and decides each resulting linear system exactly
// by vertex probing (boxes of dimension <= 3). Returns SAT or UNSAT.
Verdict brute_force_oracle(const Query& query);

}  // namespace nnshrink

#endif  // NNSHRINK_VERIFY_HPP_
