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

#include "nnshrink/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nnshrink {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

// --- twin construction --------------------------------------------------------

TwinNetwork make_twin(const Network& net, const NeuronRef& v, double a,
                      double b) {
  const Neuron& victim = net.at(v);
  if (victim.kind != Neuron::Kind::kActivation)
    throw InputError("make_twin: " + to_string(v) + " is not an activation");

  TwinNetwork twin;
  twin.replaced = v;
  twin.suffix_start = v.layer;
  twin.composite = net;
  Network& comp = twin.composite;

  const int n = net.layer_count();
  auto remap = [&](NeuronRef ref) -> NeuronRef {
    if (ref.layer >= v.layer) return {n + ref.layer - v.layer, ref.index};
    return ref;
  };
  for (int l = v.layer; l < n; ++l) {
    std::vector<Neuron> copy = net.layers[l];
    for (Neuron& neuron : copy) {
      neuron.id = comp.next_id++;
      if (neuron.kind == Neuron::Kind::kWeightedSum) {
        for (Term& t : neuron.terms) t.source = remap(t.source);
      } else {
        neuron.source = remap(neuron.source);
      }
    }
    comp.layers.push_back(std::move(copy));
  }
  // The duplicated v computes the line over its (shared-prefix) source.
  Neuron& twin_v = comp.layers[n][v.index];
  twin_v = Neuron::weighted_sum(b, {{victim.source, a}});

  twin.pairs.resize(n - v.layer);
  for (int l = v.layer; l < n; ++l) {
    auto& row = twin.pairs[l - v.layer];
    for (int i = 0; i < net.layer_size(l); ++i)
      row.push_back({{l, i}, {n + l - v.layer, i}});
  }
  return twin;
}

int ws_layers_after(const Network& net, int layer) {
  int count = 0;
  for (int l = layer + 1; l < net.layer_count(); ++l)
    for (const Neuron& n : net.layers[l])
      if (n.kind == Neuron::Kind::kWeightedSum) {
        ++count;
        break;
      }
  return count;
}

namespace {

// Original-layer index of the k-th weighted-sum layer after `layer`.
int kth_ws_layer_after(const Network& net, int layer, int k) {
  int count = 0;
  for (int l = layer + 1; l < net.layer_count(); ++l) {
    bool has_ws = false;
    for (const Neuron& n : net.layers[l])
      if (n.kind == Neuron::Kind::kWeightedSum) has_ws = true;
    if (has_ws && ++count == k) return l;
  }
  throw InputError("forward query: k = " + std::to_string(k) +
                   " goes past the output layer");
}

}  // namespace

// --- query builders -------------------------------------------------------------

std::vector<Query> build_phase_query(const Network& net, const NeuronRef& v,
                                     int segment, const Box& box) {
  const Neuron& neuron = net.at(v);
  if (neuron.kind != Neuron::Kind::kActivation)
    throw InputError("phase query: " + to_string(v) + " is not an activation");
  if (segment < 0 || segment >= neuron.fn.piece_count())
    throw InputError("phase query: segment out of range");

  // Everything after the source's layer is irrelevant to the query.
  Network truncated = net;
  truncated.layers.resize(neuron.source.layer + 1);

  std::vector<Query> out;
  const double lo = neuron.fn.breakpoints[segment];
  const double hi = neuron.fn.breakpoints[segment + 1];
  if (std::isfinite(lo)) {
    LinearConstraint c{{{neuron.source, 1.0}}, Cmp::kLt, lo};
    out.push_back({truncated, box, FeasibilityGoal{{c}}});
  }
  if (std::isfinite(hi)) {
    LinearConstraint c{{{neuron.source, 1.0}}, Cmp::kGt, hi};
    out.push_back({truncated, box, FeasibilityGoal{{c}}});
  }
  return out;
}

Query build_forward_query(const Network& net, const NeuronRef& v, double a,
                          double b, int k, const Box& box, double tau) {
  if (k < 1) throw InputError("forward query: k must be >= 1");
  const int target = kth_ws_layer_after(net, v.layer, k);
  TwinNetwork twin = make_twin(net, v, a, b);
  LayerMismatchGoal goal;
  goal.pairs = twin.pairs[target - twin.suffix_start];
  goal.tau = tau;
  return {std::move(twin.composite), box, std::move(goal)};
}

Query build_result_preserving_query(const Network& net, const NeuronRef& v,
                                    double a, double b, double delta,
                                    const Box& box) {
  if (net.output_dim() < 2)
    throw InputError("result-preserving query needs a classifier (>= 2 outputs)");
  if (delta < 0) throw InputError("result-preserving query: delta must be >= 0");
  TwinNetwork twin = make_twin(net, v, a, b);
  ArgmaxMismatchGoal goal;
  goal.outputs = twin.pairs.back();
  goal.delta = delta;
  return {std::move(twin.composite), box, std::move(goal)};
}

// --- concrete goal check ----------------------------------------------------------

namespace {

bool constraint_holds(const LinearConstraint& c, const LayerTrace& trace) {
  double acc = 0.0;
  for (const Term& t : c.terms) acc += t.coeff * trace.at(t.source);
  switch (c.cmp) {
    case Cmp::kLt: return acc < c.rhs;
    case Cmp::kLe: return acc <= c.rhs;
    case Cmp::kGt: return acc > c.rhs;
    case Cmp::kGe: return acc >= c.rhs;
  }
  return false;
}

int argmax_lowest(const std::vector<double>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

// Index of the strict winner with margin > delta, or -1.
int margin_winner(const std::vector<double>& v, double delta) {
  const int w = argmax_lowest(v);
  double runner = -kInf;
  for (int i = 0; i < static_cast<int>(v.size()); ++i)
    if (i != w) runner = std::max(runner, v[i]);
  return (v[w] - runner > delta) ? w : -1;
}

}  // namespace

bool goal_holds_at(const Query& query, const std::vector<double>& x) {
  const LayerTrace trace = evaluate(query.network, x);
  if (const auto* goal = std::get_if<FeasibilityGoal>(&query.goal)) {
    for (const LinearConstraint& c : goal->constraints)
      if (!constraint_holds(c, trace)) return false;
    return true;
  }
  if (const auto* goal = std::get_if<LayerMismatchGoal>(&query.goal)) {
    for (const PairedNeuron& p : goal->pairs)
      if (std::abs(trace.at(p.original) - trace.at(p.twin)) > goal->tau)
        return true;
    return false;
  }
  const auto& goal = std::get<ArgmaxMismatchGoal>(query.goal);
  std::vector<double> orig, twin;
  for (const PairedNeuron& p : goal.outputs) {
    orig.push_back(trace.at(p.original));
    twin.push_back(trace.at(p.twin));
  }
  const int w = margin_winner(orig, goal.delta);
  if (w < 0) return false;
  return argmax_lowest(twin) != w;
}

// --- branch and bound ----------------------------------------------------------------

namespace {

LinForm diff_form(const PairedNeuron& p) {
  LinForm f;
  f.add(p.original, 1.0);
  f.add(p.twin, -1.0);
  return f;
}

// True when no point of the node can satisfy the goal.
bool provably_violated(const Query& query, const BoundAnalysis& analysis) {
  if (const auto* goal = std::get_if<FeasibilityGoal>(&query.goal)) {
    for (const LinearConstraint& c : goal->constraints) {
      LinForm form;
      for (const Term& t : c.terms) form.add(t.source, t.coeff);
      const Interval iv = analysis.bound_linear(form);
      switch (c.cmp) {
        case Cmp::kLt:
          if (iv.lo >= c.rhs - kStrictSlack) return true;
          break;
        case Cmp::kLe:
          if (iv.lo > c.rhs) return true;
          break;
        case Cmp::kGt:
          if (iv.hi <= c.rhs + kStrictSlack) return true;
          break;
        case Cmp::kGe:
          if (iv.hi < c.rhs) return true;
          break;
      }
    }
    return false;
  }

  if (const auto* goal = std::get_if<LayerMismatchGoal>(&query.goal)) {
    for (const PairedNeuron& p : goal->pairs) {
      const Interval d = analysis.bound_linear(diff_form(p));
      if (d.hi > goal->tau + kStrictSlack || d.lo < -goal->tau - kStrictSlack)
        return false;  // this pair might still mismatch
    }
    return true;
  }

  const auto& goal = std::get<ArgmaxMismatchGoal>(query.goal);
  const int m = static_cast<int>(goal.outputs.size());
  // ub_orig[i][j] bounds orig_i - orig_j from above; ub_twin the twin side.
  std::vector<std::vector<double>> ub_orig(m, std::vector<double>(m, 0.0));
  std::vector<std::vector<double>> ub_twin(m, std::vector<double>(m, 0.0));
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      LinForm fo;
      fo.add(goal.outputs[i].original, 1.0);
      fo.add(goal.outputs[j].original, -1.0);
      ub_orig[i][j] = analysis.bound_linear(fo).hi;
      LinForm ft;
      ft.add(goal.outputs[i].twin, 1.0);
      ft.add(goal.outputs[j].twin, -1.0);
      ub_twin[i][j] = analysis.bound_linear(ft).hi;
    }
  }
  // A mismatch witness has an original delta-winner w and a twin index j
  // that the twin argmax prefers over w. Rule every (w, j) pattern out.
  for (int w = 0; w < m; ++w) {
    bool w_possible = true;
    for (int j = 0; j < m && w_possible; ++j)
      if (j != w && ub_orig[w][j] <= goal.delta + kStrictSlack)
        w_possible = false;  // w can never carry the margin
    if (!w_possible) continue;
    for (int j = 0; j < m; ++j) {
      if (j == w) continue;
      // Twin prefers j over w: ties go to the lower index.
      const bool strict_needed = j > w;
      if (strict_needed ? ub_twin[j][w] <= kStrictSlack : ub_twin[j][w] < 0.0)
        continue;
      // Coupled check: a witness needs (o_w - o_j > delta) and
      // (t_j - t_w >= 0), hence their sum exceeds delta.
      LinForm coupled;
      coupled.add(goal.outputs[w].original, 1.0);
      coupled.add(goal.outputs[j].original, -1.0);
      coupled.add(goal.outputs[j].twin, 1.0);
      coupled.add(goal.outputs[w].twin, -1.0);
      if (analysis.bound_linear(coupled).hi <= goal.delta + kStrictSlack)
        continue;
      return false;  // pattern (w, j) survives
    }
  }
  return true;
}

std::vector<std::vector<double>> probe_points(const Box& box) {
  std::vector<double> center(box.dim());
  for (int d = 0; d < box.dim(); ++d)
    center[d] = 0.5 * (box.dims[d].lo + box.dims[d].hi);
  std::vector<std::vector<double>> out{center};
  for (int d = 0; d < box.dim(); ++d) {
    auto lo = center, hi = center;
    lo[d] = box.dims[d].lo;
    hi[d] = box.dims[d].hi;
    out.push_back(std::move(lo));
    out.push_back(std::move(hi));
  }
  return out;
}

}  // namespace

Verdict solve(const Query& query, std::int64_t budget) {
  if (budget < 1) throw InputError("solve: budget must be >= 1");
  if (query.box.dim() != query.network.input_dim())
    throw InputError("solve: box does not match the network input dimension");

  Verdict verdict;
  std::vector<Box> stack{query.box};
  std::int64_t unresolved = 0;
  while (!stack.empty()) {
    if (verdict.nodes >= budget) {
      verdict.status = Verdict::Status::kUnknown;
      verdict.frontier = static_cast<std::int64_t>(stack.size()) + unresolved;
      return verdict;
    }
    const Box node = stack.back();
    stack.pop_back();
    ++verdict.nodes;

    BoundAnalysis analysis(query.network, node);
    if (provably_violated(query, analysis)) continue;

    bool found = false;
    for (const auto& x : probe_points(node)) {
      if (goal_holds_at(query, x)) {
        verdict.status = Verdict::Status::kSat;
        verdict.witness = x;
        found = true;
        break;
      }
    }
    if (found) {
      if (!goal_holds_at(query, verdict.witness))
        throw InternalError("solve: witness failed re-validation");
      return verdict;
    }

    const int d = node.widest_dim();
    if (node.dims[d].width() <= 1e-12) {
      // Too small to split and not decided; remember it as undecidable.
      ++unresolved;
      continue;
    }
    auto [lo_half, hi_half] = node.bisect(d);
    stack.push_back(std::move(hi_half));
    stack.push_back(std::move(lo_half));
  }
  if (unresolved > 0) {
    verdict.status = Verdict::Status::kUnknown;
    verdict.frontier = unresolved;
  } else {
    verdict.status = Verdict::Status::kUnsat;
  }
  return verdict;
}

}  // namespace nnshrink
