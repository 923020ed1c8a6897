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

#ifndef NNSHRINK_PIPELINE_HPP_
#define NNSHRINK_PIPELINE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "nnshrink/redundancy.hpp"

namespace nnshrink {

enum class SimplifyMode { kExact, kResultPreserving, kRelaxed, kFull };

SimplifyMode mode_from_string(const std::string& s);
std::string to_string(SimplifyMode mode);

struct PipelineConfig {
  int bound_budget = 64;            // leaves per tighten pass
  std::int64_t sim_samples = 100000;
  std::int64_t verify_budget = 10000;  // branch-and-bound nodes per query
  SimplifyMode mode = SimplifyMode::kExact;
  double delta = 0.0;          // borderline margin (result-preserving)
  double error_budget = 0.0;   // e_t (relaxed)
  std::uint64_t seed = 0;
  double tau = kMismatchTau;   // forward mismatch tolerance
  // Forward queries always reach to the output layer; classification
  // networks use result-preserving queries instead.
  enum class ForwardKPolicy { kToOutput } forward_k_policy =
      ForwardKPolicy::kToOutput;
};

struct RemovalRecord {
  std::int64_t neuron_id = -1;
  NeuronRef original_ref;      // position in the network handed to simplify
  std::string kind;            // redundancy kind or "weighted_sum_eliminated"
  int segment = -1;
  double a = 0.0, b = 0.0;
  int k = 0;
  double epsilon = 0.0;
  std::string evidence;
};

struct StepTiming {
  std::string name;
  double wall_ms = 0.0;
};

struct SimplifyReport {
  std::string mode;
  std::uint64_t seed = 0;
  int neurons_before = 0, neurons_after = 0;
  int hidden_before = 0, hidden_after = 0;
  // Per-kind counts over removed activation neurons, plus bookkeeping that
  // reconciles: removed + surviving + unknown == hidden_before.
  int phase_redundant = 0;
  int forward_redundant = 0;
  int result_preserving = 0;
  int relaxed_redundant = 0;
  int ws_eliminated = 0;
  int removed_total = 0;
  int unknown = 0;
  int surviving = 0;
  std::vector<RemovalRecord> removed;
  std::vector<RemovalRecord> unknowns;  // candidates left in place
  std::vector<std::pair<double, double>> output_error;  // final ledger
  double error_headline = 0.0;
  std::vector<StepTiming> steps;
};

nlohmann::json report_to_json(const SimplifyReport& report);

// Runs the four-step strategy on one network over one input box:
//   1. tightened bounds; every bound-certified phase-redundant neuron is
//      replaced by its segment line and the graph re-saturated;
//   2. simulations rule out candidates with concrete counterexamples;
//   3. the verifier dispatches the survivors (phase queries first, then a
//      forward-to-output or result-preserving query depending on the mode
//      and network kind), removing on UNSAT in (layer, index) order;
//   4. in relaxed modes, greedy linearization under the error budget.
// UNKNOWN verdicts leave the neuron in place and are reported.
std::pair<Network, SimplifyReport> simplify(const Network& net, const Box& box,
                                            const PipelineConfig& config);

}  // namespace nnshrink

#endif  // NNSHRINK_PIPELINE_HPP_
