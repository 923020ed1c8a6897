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

#ifndef NNSHRINK_REDUNDANCY_HPP_
#define NNSHRINK_REDUNDANCY_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nnshrink/bounds.hpp"
#include "nnshrink/network.hpp"
#include "nnshrink/verify.hpp"

namespace nnshrink {

// Replacing an activation neuron with a line, with a certified local error.
// Zero and Identity are the ReLU shorthands for Line(0,0) / Line(1,0) and
// carry the one-sided certificates of the error calculus; a general Line
// certifies max |fn - line| <= epsilon over the source's bounds.
struct Replacement {
  enum class Mode { kZero, kIdentity, kLine };
  NeuronRef neuron;
  Mode mode = Mode::kLine;
  double a = 0.0;
  double b = 0.0;
  double epsilon = 0.0;

  static Replacement zero(NeuronRef v, double epsilon);
  static Replacement identity(NeuronRef v, double epsilon);
  static Replacement line(NeuronRef v, double a, double b, double epsilon);

  double slope() const;
  double intercept() const;
};

// Per-neuron lower/upper deviation bounds between the original network and
// the network with a set of replacements applied: for every input,
// N(x) - err_lo <= N'(x) <= N(x) + err_hi, componentwise at the outputs.
struct ErrorLedger {
  std::vector<std::vector<std::pair<double, double>>> err;  // (lo, hi)

  std::pair<double, double> at(const NeuronRef& ref) const {
    return err[ref.layer][ref.index];
  }
  std::vector<std::pair<double, double>> output_bounds;  // per component
  double headline() const;  // max over components of max(lo, hi)
};

enum class RedundancyKind {
  kPhaseRedundant,
  kForwardRedundant,
  kResultPreserving,
  kRelaxedRedundant,
};

std::string to_string(RedundancyKind kind);

struct RedundancyVerdict {
  NeuronRef neuron;
  std::int64_t neuron_id = -1;
  RedundancyKind kind = RedundancyKind::kPhaseRedundant;
  int segment = -1;        // phase
  double a = 0.0, b = 0.0; // replacement line
  int k = 0;               // forward distance
  double delta = 0.0;      // result-preserving margin
  double epsilon = 0.0;    // relaxed local error
  std::string evidence;
};

// The unique segment containing the certified source bounds, if any.
std::optional<int> classify_phase_by_bounds(const Network& net,
                                            const BoundsMap& bounds,
                                            const NeuronRef& v);

// --- simulation filter ---------------------------------------------------------

struct Candidate {
  enum class Kind { kPhase, kForward, kResultPreserving };
  Kind kind = Kind::kPhase;
  NeuronRef neuron;
  double a = 0.0, b = 0.0;  // replacement line (forward / result-preserving)
  int k = 0;                // forward distance in weighted-sum layers
  double tau = kMismatchTau;
  double delta = 0.0;
};

struct DroppedCandidate {
  Candidate candidate;
  // The input that concretely refutes the candidate. Phase drops need two
  // inputs to exhibit two segments; `earlier_input` holds the first one.
  std::vector<double> witness;
  std::vector<double> earlier_input;
  int earlier_segment = -1;
  int witness_segment = -1;
};

struct SimulationResult {
  std::vector<Candidate> survivors;
  // For surviving phase candidates: the single segment every sample hit.
  std::vector<int> phase_segment;
  std::vector<DroppedCandidate> dropped;
};

// Evaluates `samples` uniform inputs (deterministic in `seed`) and drops
// every candidate a sample concretely refutes: a phase candidate whose
// source visits two segments, or a forward / result-preserving candidate
// with a witnessed mismatch.
SimulationResult simulate_filter(const Network& net, const Box& box,
                                 const std::vector<Candidate>& candidates,
                                 std::int64_t samples, std::uint64_t seed);

// --- relaxed redundancy ----------------------------------------------------------

struct MinimalErrorLine {
  double a = 0.0;
  double b = 0.0;
  double e_max = 0.0;
};

// The minimal-error line replacing ReLU over [lb, ub] with lb < 0 < ub:
//   a = ub/(ub-lb), b = -lb*ub/(2(ub-lb)), worst error b attained at 0.
MinimalErrorLine minimal_error_line(double lb, double ub);

// Minimax line for a general piecewise-linear function over [lb, ub]
// (equioscillation over breakpoints and endpoints); coincides with
// minimal_error_line for ReLU.
MinimalErrorLine chebyshev_line(const PwlFn& fn, double lb, double ub);

// Exact max |fn - (a x + b)| over [lo, hi].
double max_line_error(const PwlFn& fn, double a, double b, double lo,
                      double hi);

// The error calculus: propagates per-neuron deviation bounds through the
// network for a set of simultaneous replacements. Every replacement must be
// certified against `bounds` (which must be sound for the original
// network); an uncertified one raises InputError naming the inequality.
ErrorLedger propagate_error_bounds(const Network& net,
                                   const std::vector<Replacement>& replacements,
                                   const BoundsMap& bounds);

struct RelaxedRemoval {
  Network network;  // replacements applied, then saturated
  ErrorLedger ledger;
  std::vector<RedundancyVerdict> accepted;
};

// Greedily linearizes unstable activations in ascending order of local
// minimax error, keeping every output component's ledger bound within the
// budget. Replacements are certified and accumulated simultaneously; the
// surgered network is saturated at the end.
RelaxedRemoval greedy_relaxed_removal(const Network& net,
                                      const BoundsMap& bounds,
                                      double error_budget);

}  // namespace nnshrink

#endif  // NNSHRINK_REDUNDANCY_HPP_
