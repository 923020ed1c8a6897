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

#include "nnshrink/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <set>

namespace nnshrink {

using nlohmann::json;

SimplifyMode mode_from_string(const std::string& s) {
  if (s == "exact") return SimplifyMode::kExact;
  if (s == "respres") return SimplifyMode::kResultPreserving;
  if (s == "relaxed") return SimplifyMode::kRelaxed;
  if (s == "full") return SimplifyMode::kFull;
  throw InputError("unknown mode \"" + s +
                   "\" (expected exact|respres|relaxed|full)");
}

std::string to_string(SimplifyMode mode) {
  switch (mode) {
    case SimplifyMode::kExact: return "exact";
    case SimplifyMode::kResultPreserving: return "respres";
    case SimplifyMode::kRelaxed: return "relaxed";
    case SimplifyMode::kFull: return "full";
  }
  return "?";
}

namespace {

class StepClock {
 public:
  explicit StepClock(SimplifyReport& report) : report_(report) {}
  void start(const std::string& name) {
    name_ = name;
    t0_ = std::chrono::steady_clock::now();
  }
  void stop() {
    const auto t1 = std::chrono::steady_clock::now();
    report_.steps.push_back(
        {name_, std::chrono::duration<double, std::milli>(t1 - t0_).count()});
  }

 private:
  SimplifyReport& report_;
  std::string name_;
  std::chrono::steady_clock::time_point t0_;
};

struct IdInfo {
  NeuronRef original_ref;
  Neuron::Kind kind;
};

RemovalRecord record_for(const RedundancyVerdict& v,
                         const std::map<std::int64_t, IdInfo>& info) {
  RemovalRecord r;
  r.neuron_id = v.neuron_id;
  r.original_ref = info.at(v.neuron_id).original_ref;
  r.kind = to_string(v.kind);
  r.segment = v.segment;
  r.a = v.a;
  r.b = v.b;
  r.k = v.k;
  r.epsilon = v.epsilon;
  r.evidence = v.evidence;
  return r;
}

bool is_classifier(const Network& net) { return net.output_dim() >= 2; }

// Lines a candidate activation could be replaced by: each segment's piece,
// first the one the simulations deem most plausible (the zero piece for
// ReLU, matching the worked examples).
std::vector<std::pair<double, double>> candidate_lines(const PwlFn& fn) {
  std::vector<std::pair<double, double>> lines;
  for (int p = 0; p < fn.piece_count(); ++p) {
    const std::pair<double, double> line{fn.slopes[p], fn.intercepts[p]};
    if (std::find(lines.begin(), lines.end(), line) == lines.end())
      lines.push_back(line);
  }
  return lines;
}

}  // namespace

std::pair<Network, SimplifyReport> simplify(const Network& net, const Box& box,
                                            const PipelineConfig& config) {
  if (box.dim() != net.input_dim())
    throw InputError("simplify: box does not match the network input dimension");
  {
    const auto violations = validate(net);
    if (!violations.empty())
      throw InputError("simplify: invalid network: " + violations.front().message +
                       " at " + to_string(violations.front().where));
  }

  SimplifyReport report;
  report.mode = to_string(config.mode);
  report.seed = config.seed;
  report.neurons_before = net.neuron_count();
  report.hidden_before = net.hidden_count();
  StepClock clock(report);

  // Snapshot identities so removals can be reported in original coordinates.
  std::map<std::int64_t, IdInfo> id_info;
  for (int l = 0; l < net.layer_count(); ++l)
    for (int i = 0; i < net.layer_size(l); ++i)
      id_info[net.layers[l][i].id] = {{l, i}, net.layers[l][i].kind};

  Network cur = net;
  std::vector<RedundancyVerdict> removals;
  std::vector<RemovalRecord> unknowns;

  // --- Step 1: bound estimation; drop every certified phase redundancy.
  clock.start("bounds");
  {
    BoundsMap bounds = tighten(cur, box, config.bound_budget);
    std::vector<std::pair<NeuronRef, int>> stable;
    for (int l = 1; l + 1 < cur.layer_count(); ++l)
      for (int i = 0; i < cur.layer_size(l); ++i)
        if (cur.layers[l][i].kind == Neuron::Kind::kActivation)
          if (auto seg = classify_phase_by_bounds(cur, bounds, {l, i}))
            stable.push_back({{l, i}, *seg});
    for (const auto& [ref, seg] : stable) {
      const Neuron& n = cur.at(ref);
      RedundancyVerdict v;
      v.neuron = ref;
      v.neuron_id = n.id;
      v.kind = RedundancyKind::kPhaseRedundant;
      v.segment = seg;
      v.a = n.fn.slopes[seg];
      v.b = n.fn.intercepts[seg];
      v.evidence = "bounds: source in segment " + std::to_string(seg);
      removals.push_back(v);
      cur = replace_activation(cur, ref, v.a, v.b);
    }
    cur = saturate_ws_elimination(cur);
  }
  clock.stop();

  // --- Step 2: simulations.
  clock.start("simulations");
  std::vector<Candidate> candidates;
  const bool classifier = is_classifier(cur);
  const bool want_respres =
      classifier && (config.mode == SimplifyMode::kResultPreserving ||
                     config.mode == SimplifyMode::kFull);
  const bool want_forward =
      !classifier && config.mode != SimplifyMode::kResultPreserving;
  for (int l = 1; l + 1 < cur.layer_count(); ++l) {
    for (int i = 0; i < cur.layer_size(l); ++i) {
      const Neuron& n = cur.layers[l][i];
      if (n.kind != Neuron::Kind::kActivation) continue;
      const NeuronRef ref{l, i};
      candidates.push_back({Candidate::Kind::kPhase, ref});
      for (const auto& [a, b] : candidate_lines(n.fn)) {
        if (want_forward) {
          Candidate c{Candidate::Kind::kForward, ref, a, b};
          c.k = ws_layers_after(cur, l);
          c.tau = config.tau;
          if (c.k >= 1) candidates.push_back(c);
        } else if (want_respres) {
          Candidate c{Candidate::Kind::kResultPreserving, ref, a, b};
          c.delta = config.delta;
          candidates.push_back(c);
        }
      }
    }
  }
  SimulationResult sim =
      simulate_filter(cur, box, candidates, config.sim_samples, config.seed);
  clock.stop();

  // --- Step 3: formal verification, layer-major over surviving neurons.
  clock.start("verification");
  {
    // Candidates grouped per neuron id; the network mutates underneath.
    struct Pending {
      std::int64_t id;
      std::optional<int> phase_segment;
      std::vector<std::pair<double, double>> lines;
    };
    std::map<std::int64_t, Pending> by_id;
    for (std::size_t s = 0; s < sim.survivors.size(); ++s) {
      const Candidate& c = sim.survivors[s];
      const std::int64_t id = cur.at(c.neuron).id;
      auto& p = by_id[id];
      p.id = id;
      if (c.kind == Candidate::Kind::kPhase)
        p.phase_segment = sim.phase_segment[s];
      else
        p.lines.push_back({c.a, c.b});
    }

    std::vector<Pending> order;
    for (auto& [id, p] : by_id) order.push_back(p);
    std::sort(order.begin(), order.end(), [&](const Pending& x, const Pending& y) {
      return id_info.at(x.id).original_ref < id_info.at(y.id).original_ref;
    });

    for (const Pending& pending : order) {
      const auto ref_now = cur.find_by_id(pending.id);
      if (!ref_now.has_value()) continue;  // swept by an earlier saturation
      const NeuronRef ref = *ref_now;
      const Neuron& n = cur.at(ref);
      bool removed = false;
      bool hit_unknown = false;
      std::string unknown_note;

      if (pending.phase_segment.has_value()) {
        bool all_unsat = true;
        std::int64_t nodes = 0;
        for (const Query& q :
             build_phase_query(cur, ref, *pending.phase_segment, box)) {
          const Verdict verdict = solve(q, config.verify_budget);
          nodes += verdict.nodes;
          if (verdict.status == Verdict::Status::kUnknown) {
            hit_unknown = true;
            unknown_note = "phase query budget exhausted";
          }
          if (verdict.status != Verdict::Status::kUnsat) all_unsat = false;
        }
        if (all_unsat) {
          const int seg = *pending.phase_segment;
          RedundancyVerdict v;
          v.neuron = ref;
          v.neuron_id = pending.id;
          v.kind = RedundancyKind::kPhaseRedundant;
          v.segment = seg;
          v.a = n.fn.slopes[seg];
          v.b = n.fn.intercepts[seg];
          v.evidence = "verified: both phase queries UNSAT (" +
                       std::to_string(nodes) + " nodes)";
          removals.push_back(v);
          cur = replace_activation(cur, ref, v.a, v.b);
          cur = saturate_ws_elimination(cur);
          removed = true;
        }
      }

      for (const auto& [a, b] : pending.lines) {
        if (removed) break;
        if (want_forward) {
          const int k = ws_layers_after(cur, ref.layer);
          if (k < 1) continue;
          const Query q = build_forward_query(cur, ref, a, b, k, box, config.tau);
          const Verdict verdict = solve(q, config.verify_budget);
          if (verdict.status == Verdict::Status::kUnsat) {
            RedundancyVerdict v;
            v.neuron = ref;
            v.neuron_id = pending.id;
            v.kind = RedundancyKind::kForwardRedundant;
            v.a = a;
            v.b = b;
            v.k = k;
            v.evidence = "forward query to output UNSAT (" +
                         std::to_string(verdict.nodes) + " nodes)";
            removals.push_back(v);
            cur = replace_activation(cur, ref, a, b);
            cur = saturate_ws_elimination(cur);
            removed = true;
          } else if (verdict.status == Verdict::Status::kUnknown) {
            hit_unknown = true;
            unknown_note = "forward query budget exhausted";
          }
        } else if (want_respres) {
          const Query q =
              build_result_preserving_query(cur, ref, a, b, config.delta, box);
          const Verdict verdict = solve(q, config.verify_budget);
          if (verdict.status == Verdict::Status::kUnsat) {
            RedundancyVerdict v;
            v.neuron = ref;
            v.neuron_id = pending.id;
            v.kind = RedundancyKind::kResultPreserving;
            v.a = a;
            v.b = b;
            v.delta = config.delta;
            v.evidence = "result-preserving query UNSAT (" +
                         std::to_string(verdict.nodes) + " nodes)";
            removals.push_back(v);
            cur = replace_activation(cur, ref, a, b);
            cur = saturate_ws_elimination(cur);
            removed = true;
          } else if (verdict.status == Verdict::Status::kUnknown) {
            hit_unknown = true;
            unknown_note = "result-preserving query budget exhausted";
          }
        }
      }

      if (!removed && hit_unknown) {
        RemovalRecord r;
        r.neuron_id = pending.id;
        r.original_ref = id_info.at(pending.id).original_ref;
        r.kind = "unknown";
        r.evidence = unknown_note;
        unknowns.push_back(r);
      }
    }
  }
  clock.stop();

  // --- Step 4: relaxed redundancy under the error budget.
  ErrorLedger ledger;
  clock.start("relaxed");
  if (config.mode == SimplifyMode::kRelaxed ||
      config.mode == SimplifyMode::kFull) {
    BoundsMap bounds = tighten(cur, box, config.bound_budget);
    RelaxedRemoval relaxed =
        greedy_relaxed_removal(cur, bounds, config.error_budget);
    for (const RedundancyVerdict& v : relaxed.accepted) removals.push_back(v);
    cur = std::move(relaxed.network);
    ledger = std::move(relaxed.ledger);
  } else {
    // No imprecision introduced in exact / result-preserving modes.
    ledger.output_bounds.assign(cur.output_dim(), {0.0, 0.0});
  }
  clock.stop();

  // --- report ---------------------------------------------------------------
  report.neurons_after = cur.neuron_count();
  report.hidden_after = cur.hidden_count();
  std::set<std::int64_t> still_present;
  for (const auto& layer : cur.layers)
    for (const Neuron& n : layer) still_present.insert(n.id);

  for (const RedundancyVerdict& v : removals) {
    // A verdict neuron may survive as a weighted sum if saturation could
    // not fold it into its consumers; count only physical removals.
    if (still_present.count(v.neuron_id)) continue;
    RemovalRecord r = record_for(v, id_info);
    report.removed.push_back(r);
    switch (v.kind) {
      case RedundancyKind::kPhaseRedundant: ++report.phase_redundant; break;
      case RedundancyKind::kForwardRedundant: ++report.forward_redundant; break;
      case RedundancyKind::kResultPreserving: ++report.result_preserving; break;
      case RedundancyKind::kRelaxedRedundant: ++report.relaxed_redundant; break;
    }
  }
  // Hidden weighted sums (and layer-split leftovers) swept along the way.
  for (const auto& [id, info] : id_info) {
    if (still_present.count(id)) continue;
    if (info.original_ref.layer == 0 ||
        info.original_ref.layer == net.layer_count() - 1)
      continue;
    bool already = false;
    for (const RemovalRecord& r : report.removed)
      if (r.neuron_id == id) already = true;
    if (already) continue;
    RemovalRecord r;
    r.neuron_id = id;
    r.original_ref = info.original_ref;
    r.kind = "weighted_sum_eliminated";
    r.evidence = "saturation";
    report.removed.push_back(r);
    ++report.ws_eliminated;
  }
  std::sort(report.removed.begin(), report.removed.end(),
            [](const RemovalRecord& x, const RemovalRecord& y) {
              return x.original_ref < y.original_ref;
            });
  report.removed_total = static_cast<int>(report.removed.size());
  // Unknown candidates that are still in the network.
  for (const RemovalRecord& u : unknowns)
    if (still_present.count(u.neuron_id)) {
      report.unknowns.push_back(u);
      ++report.unknown;
    }
  report.surviving =
      report.hidden_before - report.removed_total - report.unknown;
  report.output_error = ledger.output_bounds;
  report.error_headline = ledger.headline();

  {
    const auto violations = validate(cur);
    if (!violations.empty())
      throw InternalError("simplify produced an invalid network: " +
                          violations.front().message);
  }
  return {cur, report};
}

json report_to_json(const SimplifyReport& report) {
  json removed = json::array();
  for (const RemovalRecord& r : report.removed) {
    json item{{"id", r.neuron_id},
              {"layer", r.original_ref.layer},
              {"index", r.original_ref.index},
              {"kind", r.kind},
              {"evidence", r.evidence}};
    if (r.kind == "phase_redundant") item["segment"] = r.segment;
    if (r.kind == "forward_redundant") item["k"] = r.k;
    if (r.kind == "relaxed_redundant") item["epsilon"] = r.epsilon;
    if (r.kind != "weighted_sum_eliminated") {
      item["line"] = {{"slope", r.a}, {"intercept", r.b}};
    }
    removed.push_back(std::move(item));
  }
  json unknowns = json::array();
  for (const RemovalRecord& r : report.unknowns)
    unknowns.push_back({{"id", r.neuron_id},
                        {"layer", r.original_ref.layer},
                        {"index", r.original_ref.index},
                        {"evidence", r.evidence}});
  json error = json::array();
  for (const auto& [lo, hi] : report.output_error)
    error.push_back({{"lo", lo}, {"hi", hi}});
  json steps = json::array();
  for (const StepTiming& s : report.steps)
    steps.push_back({{"name", s.name}, {"wall_ms", s.wall_ms}});
  return json{
      {"mode", report.mode},
      {"seed", report.seed},
      {"size", {{"neurons_before", report.neurons_before},
                {"neurons_after", report.neurons_after},
                {"hidden_before", report.hidden_before},
                {"hidden_after", report.hidden_after}}},
      {"counts", {{"phase_redundant", report.phase_redundant},
                  {"forward_redundant", report.forward_redundant},
                  {"result_preserving", report.result_preserving},
                  {"relaxed_redundant", report.relaxed_redundant},
                  {"weighted_sum_eliminated", report.ws_eliminated},
                  {"removed_total", report.removed_total},
                  {"unknown", report.unknown},
                  {"surviving", report.surviving}}},
      {"removed", std::move(removed)},
      {"unknown", std::move(unknowns)},
      {"output_error", {{"components", std::move(error)},
                        {"headline", report.error_headline}}},
      {"steps", std::move(steps)}};
}

}  // namespace nnshrink
