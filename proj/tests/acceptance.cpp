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

// End-to-end acceptance suite. Each criterion prints one PASS/FAIL line;
// the process exits with the number of failures.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "nnshrink/pipeline.hpp"
#include "nnshrink/slice.hpp"
#include "nnshrink/verify.hpp"
#include "test_util.hpp"

using namespace nnshrink;
using namespace nnshrink::testing;

namespace {

struct Failure {
  std::string detail;
};

void expect(bool ok, const std::string& detail) {
  if (!ok) throw Failure{detail};
}

// The slicing test subject: 3 inputs, two hidden ReLU layers of width 10,
// two outputs. Random weights, then trained by hand for the linearization
// experiment: biases are nudged until every pre-activation is one-sided on
// the all-low corner sub-domain of the 4x4x4 grid, so that entry provably
// collapses to an affine map while the rest of the box keeps a healthy
// share of unstable neurons.
Network make_toy_network() {
  Rng rng(0x70e);
  Network net = random_relu_network(rng, 3, {10, 10}, 2, 0.55);
  const Box corner = unit_box(3, -1.0, -0.5);
  for (int pass = 0; pass < 4; ++pass) {
    const BoundsMap bounds = tighten(net, corner, 64);
    bool changed = false;
    for (int l = 1; l + 1 < net.layer_count(); ++l) {
      for (int i = 0; i < net.layer_size(l); ++i) {
        const Neuron& n = net.layers[l][i];
        if (n.kind != Neuron::Kind::kActivation) continue;
        const Interval src = bounds.at(n.source);
        if (src.lo < 0.0 && src.hi > 0.0) {
          const double shift =
              src.hi <= -src.lo ? -(src.hi + 0.05) : (-src.lo + 0.05);
          net.at(n.source).bias += shift;
          changed = true;
        }
      }
    }
    if (!changed) break;
  }
  return net;
}

double phase_fraction(const SimplifyReport& report, int activation_count) {
  return activation_count == 0
             ? 1.0
             : static_cast<double>(report.phase_redundant) / activation_count;
}

int count_activations(const Network& net) {
  int n = 0;
  for (const auto& layer : net.layers)
    for (const Neuron& neuron : layer)
      if (neuron.kind == Neuron::Kind::kActivation) ++n;
  return n;
}

// ---- criterion bodies -------------------------------------------------------

void criterion1_fig3() {
  const Network net = fig3_network();
  expect(evaluate(net, {1.0}).outputs()[0] == 12.0,
         "fig3 output at 1.0 is not exactly 12");

  PipelineConfig config;
  config.sim_samples = 20000;
  auto [simplified, report] = simplify(net, unit_box(1), config);

  bool y_forward = false, f12_active = false;
  for (const RemovalRecord& r : report.removed) {
    if (r.original_ref == fig3_y() && r.kind == "forward_redundant")
      y_forward = true;
    if (r.original_ref == fig3_f12() && r.kind == "phase_redundant" &&
        r.segment == 1)
      f12_active = true;
  }
  expect(y_forward, "y was not removed as forward-redundant");
  expect(f12_active, "ReLU(x+1) was not removed as active-redundant");

  // The library-level forward facts behind the removal: distance two
  // weighted-sum layers is already safe, distance one is not.
  expect(solve(build_forward_query(net, fig3_y(), 0, 0, 2, unit_box(1)), 10000)
                 .status == Verdict::Status::kUnsat,
         "k=2 forward query not UNSAT");
  expect(solve(build_forward_query(net, fig3_y(), 0, 0, 1, unit_box(1)), 10000)
                 .status == Verdict::Status::kSat,
         "k=1 forward query not SAT");

  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-1.0, 1.0);
    const double diff = std::abs(evaluate(net, {x}).outputs()[0] -
                                 evaluate(simplified, {x}).outputs()[0]);
    expect(diff <= 1e-9, "outputs drifted by " + std::to_string(diff));
  }
}

void criterion2_fig4() {
  const Network net = fig4_network();
  const auto at_half = evaluate(net, {0.5}).outputs();
  expect(std::abs(at_half[0] - 1.3) < 1e-12 &&
             std::abs(at_half[1] - 0.3) < 1e-12,
         "fig4 output at 0.5 is not [1.3, 0.3]");
  const auto zeroed =
      evaluate(replace_activation(net, fig4_y(), 0, 0), {0.5}).outputs();
  expect(std::abs(zeroed[0] - 1.0) < 1e-12 &&
             std::abs(zeroed[1] - 0.6) < 1e-12,
         "zeroed-y output at 0.5 is not [1.0, 0.6]");

  PipelineConfig config;
  config.mode = SimplifyMode::kResultPreserving;
  config.delta = 0.0;
  config.sim_samples = 20000;
  auto [simplified, report] = simplify(net, unit_box(1), config);
  bool y_removed = false;
  for (const RemovalRecord& r : report.removed)
    if (r.original_ref == fig4_y() && r.kind == "result_preserving")
      y_removed = true;
  expect(y_removed, "y was not removed as result-preserving");

  for (int i = 0; i <= 10000; ++i) {
    const double x = -1.0 + 2.0 * i / 10000;
    const auto a = evaluate(net, {x}).outputs();
    const auto b = evaluate(simplified, {x}).outputs();
    expect((a[0] >= a[1]) == (b[0] >= b[1]),
           "argmax flipped at x = " + std::to_string(x));
  }
}

void criterion3_minimal_error_line() {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const double lb = rng.uniform(-4.0, -0.02);
    const double ub = rng.uniform(0.02, 4.0);
    const MinimalErrorLine best = minimal_error_line(lb, ub);
    const double grid_best =
        grid_max_line_error(PwlFn::relu(), best.a, best.b, lb, ub);
    expect(std::abs(grid_best - best.e_max) <= 1e-9,
           "e_max mismatch vs grid oracle: " + std::to_string(grid_best) +
               " vs " + std::to_string(best.e_max));
    const double da = 0.25 * std::max(0.05, std::abs(best.a));
    const double db = 0.25 * std::max(0.05, std::abs(best.b));
    for (int i = -50; i <= 50; ++i) {
      for (int j = -50; j <= 50; ++j) {
        if (i == 0 && j == 0) continue;
        // A 100-step grid plus the breakpoints is exact for |ReLU - line|.
        const double e =
            grid_max_line_error(PwlFn::relu(), best.a + da * i / 50,
                                best.b + db * j / 50, lb, ub, /*steps=*/100);
        expect(e >= best.e_max - 1e-12, "perturbed line beat the optimum");
      }
    }
  }
}

void criterion4_ledger_soundness() {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const int inputs = 1 + static_cast<int>(rng.next_u64() % 3);
    const int w1 = 2 + static_cast<int>(rng.next_u64() % 7);
    const int w2 = 2 + static_cast<int>(rng.next_u64() % 7);
    const int outputs = 1 + static_cast<int>(rng.next_u64() % 2);
    const Network net =
        random_relu_network(rng, inputs, {w1, w2}, outputs, 0.7);
    const Box box = unit_box(inputs);
    const BoundsMap bounds = tighten(net, box, 16);

    std::vector<Replacement> rs;
    for (int l = 1; l + 1 < net.layer_count(); ++l) {
      for (int i = 0; i < net.layer_size(l); ++i) {
        if (net.layers[l][i].kind != Neuron::Kind::kActivation) continue;
        if (rng.uniform() < 0.5) continue;
        const Interval src = bounds.at(net.layers[l][i].source);
        const double roll = rng.uniform();
        if (src.lo < 0 && src.hi > 0) {
          const MinimalErrorLine lm = minimal_error_line(src.lo, src.hi);
          if (roll < 0.5)
            rs.push_back(Replacement::line({l, i}, lm.a, lm.b, lm.e_max));
          else if (roll < 0.75)
            rs.push_back(Replacement::zero({l, i}, src.hi));
          else
            rs.push_back(Replacement::identity({l, i}, -src.lo));
        } else if (src.hi <= 0) {
          rs.push_back(Replacement::zero({l, i}, std::max(0.0, src.hi)));
        } else {
          rs.push_back(Replacement::identity({l, i}, std::max(0.0, -src.lo)));
        }
      }
    }
    const ErrorLedger ledger = propagate_error_bounds(net, rs, bounds);
    Network replaced = net;
    for (const Replacement& r : rs)
      replaced = replace_activation(replaced, r.neuron, r.slope(), r.intercept());

    for (int s = 0; s < 10000; ++s) {
      const auto x = rng.in_box(box);
      const auto orig = evaluate(net, x).outputs();
      const auto mod = evaluate(replaced, x).outputs();
      for (int c = 0; c < outputs; ++c) {
        expect(mod[c] >= orig[c] - ledger.output_bounds[c].first - 1e-9 &&
                   mod[c] <= orig[c] + ledger.output_bounds[c].second + 1e-9,
               "ledger bound violated on net " + std::to_string(t));
      }
    }
  }
}

Network c56_network(int t, Rng& rng) {
  const int inputs = 1 + static_cast<int>(rng.next_u64() % 3);
  const int w1 = 2 + static_cast<int>(rng.next_u64() % 2);
  const int w2 = 2 + static_cast<int>(rng.next_u64() % 2);
  (void)t;
  return random_relu_network(rng, inputs, {w1, w2}, 2, 0.9);
}

void criterion5_verifier_vs_oracle() {
  Rng rng(5);
  int total = 0, unknown = 0;
  for (int t = 0; t < 200; ++t) {
    const Network net = c56_network(t, rng);
    const Box box = unit_box(net.input_dim());
    std::vector<Query> queries;
    const int w1 = net.layer_size(2);
    const NeuronRef v1{2, static_cast<int>(rng.next_u64() % w1)};
    for (const Query& q :
         build_phase_query(net, v1, static_cast<int>(rng.next_u64() % 2), box))
      queries.push_back(q);
    queries.push_back(build_forward_query(
        net, v1, rng.uniform(0.0, 1.0), rng.uniform(-0.3, 0.3),
        1 + static_cast<int>(rng.next_u64() % 2), box));
    const int w2 = net.layer_size(4);
    queries.push_back(build_result_preserving_query(
        net, {4, static_cast<int>(rng.next_u64() % w2)}, 0.0, 0.0, 0.0, box));

    for (const Query& q : queries) {
      ++total;
      const Verdict got = solve(q, 10000);
      if (got.status == Verdict::Status::kUnknown) {
        ++unknown;
        continue;
      }
      const Verdict want = brute_force_oracle(q);
      expect(got.status == want.status,
             "verdict mismatch on net " + std::to_string(t));
      if (got.status == Verdict::Status::kSat)
        expect(goal_holds_at(q, got.witness), "invalid witness");
    }
  }
  expect(unknown * 10 < total, "UNKNOWN rate too high: " +
                                   std::to_string(unknown) + "/" +
                                   std::to_string(total));
}

void criterion6_bound_soundness() {
  Rng rng(5);  // the same corpus as criterion 5
  for (int t = 0; t < 200; ++t) {
    const Network net = c56_network(t, rng);
    const Box box = unit_box(net.input_dim());
    const BoundsMap itv = interval_bounds(net, box);
    const BoundsMap sym = symbolic_bounds(net, box);
    const BoundsMap tgt = tighten(net, box, 16);
    Rng sampler(6000 + t);
    for (int s = 0; s < 10000; ++s) {
      const auto x = sampler.in_box(box);
      const LayerTrace trace = evaluate(net, x);
      for (int l = 0; l < net.layer_count(); ++l)
        for (int i = 0; i < net.layer_size(l); ++i) {
          const double v = trace.values[l][i];
          expect(v >= itv.intervals[l][i].lo - 1e-9 &&
                     v <= itv.intervals[l][i].hi + 1e-9,
                 "interval bound unsound");
          expect(v >= sym.intervals[l][i].lo - 1e-9 &&
                     v <= sym.intervals[l][i].hi + 1e-9,
                 "symbolic bound unsound");
          expect(v >= tgt.intervals[l][i].lo - 1e-9 &&
                     v <= tgt.intervals[l][i].hi + 1e-9,
                 "tightened bound unsound");
        }
    }
    for (int l = 0; l < net.layer_count(); ++l)
      for (int i = 0; i < net.layer_size(l); ++i) {
        expect(sym.intervals[l][i].lo >= itv.intervals[l][i].lo - 1e-9 &&
                   sym.intervals[l][i].hi <= itv.intervals[l][i].hi + 1e-9,
               "symbolic looser than interval");
        expect(tgt.intervals[l][i].lo >= sym.intervals[l][i].lo - 1e-9 &&
                   tgt.intervals[l][i].hi <= sym.intervals[l][i].hi + 1e-9,
               "tighten looser than symbolic");
      }
  }
}

PipelineConfig toy_config() {
  PipelineConfig config;
  config.sim_samples = 10000;
  config.verify_budget = 2000;
  config.bound_budget = 64;
  config.seed = 7;
  return config;
}

void criterion7_slicing(const Network& toy, NetworkFamily& family_out) {
  const Box box = unit_box(3);
  const int activations = count_activations(toy);

  auto [base_net, base_report] = simplify(toy, box, toy_config());
  const double base_fraction = phase_fraction(base_report, activations);

  SlicePlan plan;
  plan.splits = {4, 4, 4};
  family_out = slice_and_simplify(toy, box, plan, toy_config(), nullptr,
                                  /*threads=*/8);
  double mean = 0.0;
  for (const FamilyEntry& e : family_out.entries)
    mean += phase_fraction(e.report, activations);
  mean /= family_out.entries.size();

  expect(mean > base_fraction,
         "slicing did not raise the mean phase-redundant fraction (" +
             std::to_string(mean) + " vs " + std::to_string(base_fraction) +
             ")");

  Rng rng(77);
  for (int s = 0; s < 10000; ++s) {
    const auto x = rng.in_box(box);
    const auto a = evaluate(toy, x).outputs();
    const auto b = family_evaluate(family_out, x);
    for (std::size_t c = 0; c < a.size(); ++c)
      expect(std::abs(a[c] - b[c]) <= 1e-6 * (1.0 + std::abs(a[c])),
             "family output drifted at sample " + std::to_string(s));
  }
}

void criterion8_linearization(const Network& toy,
                              const NetworkFamily& family) {
  // Constructive choice: corner sub-domains first (index 0 is the all-low
  // corner of the row-major grid).
  std::vector<std::int64_t> corners;
  const int n = 4;
  for (int mask = 0; mask < 8; ++mask) {
    std::int64_t flat = 0;
    for (int d = 0; d < 3; ++d)
      flat = flat * n + (((mask >> (2 - d)) & 1) ? n - 1 : 0);
    corners.push_back(flat);
  }
  std::int64_t linear_entry = -1;
  for (std::int64_t idx : corners) {
    if (family.entries[idx].affine.has_value()) {
      linear_entry = idx;
      break;
    }
  }
  expect(linear_entry >= 0, "no corner sub-domain fully linearized");

  const FamilyEntry& entry = family.entries[linear_entry];
  Rng rng(88);
  for (int s = 0; s < 10000; ++s) {
    const auto x = rng.in_box(entry.box);
    const auto a = evaluate(toy, x).outputs();
    const auto b = entry.affine->apply(x);
    for (std::size_t c = 0; c < a.size(); ++c)
      expect(std::abs(a[c] - b[c]) <= 1e-6 * (1.0 + std::abs(a[c])),
             "affine entry drifted from the original");
  }
}

void criterion9_relaxed_sweep(const Network& toy) {
  const Box box = unit_box(3);
  int previous_removed = -1;
  for (const double budget : {1e-4, 1e-3, 1e-2}) {
    PipelineConfig config = toy_config();
    config.mode = SimplifyMode::kRelaxed;
    config.error_budget = budget;
    auto [simplified, report] = simplify(toy, box, config);
    expect(report.error_headline <= budget,
           "ledger headline exceeds the budget");
    Rng rng(99);
    double worst = 0.0;
    for (int s = 0; s < 10000; ++s) {
      const auto x = rng.in_box(box);
      const auto a = evaluate(toy, x).outputs();
      const auto b = evaluate(simplified, x).outputs();
      for (std::size_t c = 0; c < a.size(); ++c)
        worst = std::max(worst, std::abs(a[c] - b[c]));
    }
    expect(worst <= report.error_headline + 1e-9,
           "empirical error exceeds the ledger bound");
    expect(report.removed_total >= previous_removed,
           "removals decreased as the budget grew");
    previous_removed = report.removed_total;
  }
}

}  // namespace

int main() {
  struct Criterion {
    std::string name;
    double limit_s;
    std::function<void()> run;
  };

  // Shared slicing artifacts between criteria 7 and 8.
  const Network toy = make_toy_network();
  NetworkFamily family;

  const std::vector<Criterion> criteria{
      {"fig3 reproduction (evaluate, exact pipeline, 1e-9 agreement)", 1.0,
       criterion1_fig3},
      {"fig4 reproduction (outputs, result-preserving removal, argmax grid)",
       1.0, criterion2_fig4},
      {"minimal-error line optimality (grid oracle, perturbation sweep)", 10.0,
       criterion3_minimal_error_line},
      {"error-ledger soundness (200 random nets, 10k samples each)", 120.0,
       criterion4_ledger_soundness},
      {"verifier vs brute-force oracle (200 nets, <10% unknown)", 300.0,
       criterion5_verifier_vs_oracle},
      {"bound soundness and dominance (200 nets, 10k samples)", 120.0,
       criterion6_bound_soundness},
      {"slicing equivalence and phase-fraction lift (4^3 sub-domains)", 300.0,
       [&] { criterion7_slicing(toy, family); }},
      {"complete linearization of a corner sub-domain", 60.0,
       [&] { criterion8_linearization(toy, family); }},
      {"relaxed budget sweep (removals monotone, bounds honored)", 300.0,
       [&] { criterion9_relaxed_sweep(toy); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    try {
      criteria[i].run();
    } catch (const Failure& f) {
      ok = false;
      detail = f.detail;
    } catch (const std::exception& e) {
      ok = false;
      detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (ok && seconds > criteria[i].limit_s) {
      ok = false;
      detail = "runtime " + std::to_string(seconds) + "s exceeds " +
               std::to_string(criteria[i].limit_s) + "s";
    }
    std::ostringstream line;
    line << (ok ? "[PASS] " : "[FAIL] ") << (i + 1) << ". " << criteria[i].name
         << " (" << seconds << " s)";
    if (!ok) line << " -- " << detail;
    std::cout << line.str() << std::endl;
    if (!ok) ++failures;
  }
  return failures;
}
