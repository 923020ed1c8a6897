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

#include <cmath>

#include "doctest.h"
#include "nnshrink/verify.hpp"
#include "test_util.hpp"

using namespace nnshrink;
using namespace nnshrink::testing;

namespace {

Query feasibility_query(const Network& net, const Box& box,
                        std::vector<LinearConstraint> constraints) {
  return {net, box, FeasibilityGoal{std::move(constraints)}};
}

}  // namespace

TEST_CASE("twin network shares the prefix and pairs the suffix") {
  const Network net = fig3_network();
  const TwinNetwork twin = make_twin(net, fig3_y(), 0.0, 0.0);
  CHECK(twin.composite.layer_count() == net.layer_count() * 2 - 2);
  // Twin y computes the zero line.
  const Neuron& tv = twin.composite.layers[net.layer_count()][0];
  CHECK(tv.kind == Neuron::Kind::kWeightedSum);
  CHECK(tv.terms.size() == 1);
  CHECK(tv.terms[0].coeff == 0.0);
  // Pairing is total over the suffix.
  std::size_t paired = 0;
  for (const auto& row : twin.pairs) paired += row.size();
  std::size_t suffix = 0;
  for (int l = fig3_y().layer; l < net.layer_count(); ++l)
    suffix += net.layer_size(l);
  CHECK(paired == suffix);
  // Composite evaluates both halves; originals unchanged.
  const LayerTrace t = evaluate(twin.composite, {1.0});
  CHECK(t.at({7, 0}) == 12.0);               // original output
  CHECK(t.at(twin.pairs.back()[0].twin) == 12.0);  // zeroed-y output
}

TEST_CASE("phase query construction") {
  const Network net = fig3_network();
  const Box box = unit_box(1);
  // Active segment of a ReLU yields one query (x < 0); inactive yields x > 0.
  auto active = build_phase_query(net, fig3_f12(), 1, box);
  REQUIRE(active.size() == 1);
  const auto& goal = std::get<FeasibilityGoal>(active[0].goal);
  REQUIRE(goal.constraints.size() == 1);
  CHECK(goal.constraints[0].cmp == Cmp::kLt);
  CHECK(goal.constraints[0].rhs == 0.0);
  // The encoded network stops right after the source layer.
  CHECK(active[0].network.layer_count() == 2);

  // A middle segment of a 3-piece function yields both sides.
  PwlFn fn;
  fn.breakpoints = {-std::numeric_limits<double>::infinity(), -1.0, 1.0,
                    std::numeric_limits<double>::infinity()};
  fn.slopes = {0.0, 1.0, 0.0};
  fn.intercepts = {-1.0, 0.0, 1.0};
  Network three = make_network({
      {Neuron::input()},
      {ws(0.0, {{{0, 0}, 1.0}})},
      {Neuron::activation({1, 0}, fn)},
      {ws(0.0, {{{2, 0}, 1.0}})},
  });
  const auto both = build_phase_query(three, {2, 0}, 1, unit_box(1, -3, 3));
  CHECK(both.size() == 2);
}

TEST_CASE("fig3 phase query is UNSAT within a few nodes") {
  const Network net = fig3_network();
  const auto queries = build_phase_query(net, fig3_f12(), 1, unit_box(1));
  REQUIRE(queries.size() == 1);
  const Verdict v = solve(queries[0], 10);
  CHECK(v.status == Verdict::Status::kUnsat);
  CHECK(v.nodes <= 10);
}

TEST_CASE("feasibility: output > 11 on fig3 is SAT near x = 1") {
  const Network net = fig3_network();
  const Query q = feasibility_query(
      net, unit_box(1), {{{{{7, 0}, 1.0}}, Cmp::kGt, 11.0}});
  const Verdict v = solve(q, 1000);
  REQUIRE(v.status == Verdict::Status::kSat);
  REQUIRE(v.witness.size() == 1);
  CHECK(evaluate(net, v.witness).outputs()[0] > 11.0);
}

TEST_CASE("budget 1 on a splitting query reports UNKNOWN with a frontier") {
  // The fig4 result-preserving proof needs the decision boundary isolated;
  // with one node the solver must give up and report its frontier.
  const Query q = build_result_preserving_query(fig4_network(), fig4_y(), 0.0,
                                                0.0, 0.0, unit_box(1));
  const Verdict v = solve(q, 1);
  CHECK(v.status == Verdict::Status::kUnknown);
  CHECK(v.nodes == 1);
  CHECK(v.frontier > 0);
  // fig3's k=2 proof, by contrast, closes at the root: the twin difference
  // cancels symbolically before y is ever expanded.
  const Verdict root = solve(
      build_forward_query(fig3_network(), fig3_y(), 0.0, 0.0, 2, unit_box(1)),
      1);
  CHECK(root.status == Verdict::Status::kUnsat);
}

TEST_CASE("fig3 forward redundancy: k=2 UNSAT, k=1 SAT") {
  const Network net = fig3_network();
  const Box box = unit_box(1);

  // ws_layers_after counts the weighted-sum layers the distance runs over.
  CHECK(ws_layers_after(net, fig3_y().layer) == 3);

  const Query k2 = build_forward_query(net, fig3_y(), 0.0, 0.0, 2, box);
  const Verdict v2 = solve(k2, 10000);
  CHECK(v2.status == Verdict::Status::kUnsat);

  const Query k1 = build_forward_query(net, fig3_y(), 0.0, 0.0, 1, box);
  const Verdict v1 = solve(k1, 10000);
  REQUIRE(v1.status == Verdict::Status::kSat);
  // The witness really does change the first weighted-sum layer after y.
  CHECK(goal_holds_at(k1, v1.witness));

  // Redundancy persists at any farther layer.
  const Query k3 = build_forward_query(net, fig3_y(), 0.0, 0.0, 3, box);
  CHECK(solve(k3, 10000).status == Verdict::Status::kUnsat);
}

TEST_CASE("replacing a phase-fixed relu with its active line is UNSAT at all k") {
  const Network net = fig3_network();
  // F1#1 = ReLU(x+1) is active over [-1,1]; identity replacement is exact.
  for (int k = 1; k <= 3; ++k) {
    const Query q =
        build_forward_query(net, fig3_f12(), 1.0, 0.0, k, unit_box(1));
    CHECK(solve(q, 10000).status == Verdict::Status::kUnsat);
  }
}

TEST_CASE("fig4 result-preserving query: published net UNSAT, raised bias SAT") {
  const Box box = unit_box(1);
  const Query ok =
      build_result_preserving_query(fig4_network(), fig4_y(), 0.0, 0.0, 0.0, box);
  CHECK(solve(ok, 10000).status == Verdict::Status::kUnsat);

  const Query broken = build_result_preserving_query(
      fig4_network(/*out2_bias=*/0.5), fig4_y(), 0.0, 0.0, 0.0, box);
  const Verdict v = solve(broken, 10000);
  REQUIRE(v.status == Verdict::Status::kSat);
  CHECK(goal_holds_at(broken, v.witness));
}

TEST_CASE("infinite borderline margin makes every query UNSAT") {
  const Query q = build_result_preserving_query(
      fig4_network(0.5), fig4_y(), 0.0, 0.0,
      std::numeric_limits<double>::infinity(), unit_box(1));
  const Verdict v = solve(q, 100);
  CHECK(v.status == Verdict::Status::kUnsat);
  CHECK(v.nodes == 1);
}

TEST_CASE("budget monotonicity") {
  const Network net = fig3_network();
  const Query q = build_forward_query(net, fig3_y(), 0.0, 0.0, 2, unit_box(1));
  const Verdict small = solve(q, 10000);
  REQUIRE(small.status == Verdict::Status::kUnsat);
  const Verdict large = solve(q, 100000);
  CHECK(large.status == Verdict::Status::kUnsat);
  CHECK(large.nodes == small.nodes);
}

TEST_CASE("determinism of verdict and witness") {
  const Network net = fig4_network(0.5);
  const Query q =
      build_result_preserving_query(net, fig4_y(), 0.0, 0.0, 0.0, unit_box(1));
  const Verdict a = solve(q, 10000);
  const Verdict b = solve(q, 10000);
  CHECK(a.status == b.status);
  CHECK(a.witness == b.witness);
  CHECK(a.nodes == b.nodes);
}

TEST_CASE("oracle agrees on the worked examples") {
  const Box box = unit_box(1);
  {
    const Query q =
        build_forward_query(fig3_network(), fig3_y(), 0.0, 0.0, 2, box);
    CHECK(brute_force_oracle(q).status == Verdict::Status::kUnsat);
  }
  {
    const Query q = build_result_preserving_query(fig4_network(), fig4_y(), 0.0,
                                                  0.0, 0.0, box);
    CHECK(brute_force_oracle(q).status == Verdict::Status::kUnsat);
  }
  {
    const Query q = build_result_preserving_query(fig4_network(0.5), fig4_y(),
                                                  0.0, 0.0, 0.0, box);
    const Verdict v = brute_force_oracle(q);
    REQUIRE(v.status == Verdict::Status::kSat);
    CHECK(goal_holds_at(q, v.witness));
  }
}

TEST_CASE("oracle: single relu net, y > 0 impossible when x <= -1") {
  Network net = make_network({
      {Neuron::input()},
      {ws(0.0, {{{0, 0}, 1.0}})},
      {relu_of(1, 0)},
      {ws(0.0, {{{2, 0}, 1.0}})},
  });
  const Query q = feasibility_query(net, unit_box(1, -3.0, -1.0),
                                    {{{{{3, 0}, 1.0}}, Cmp::kGt, 0.0}});
  CHECK(brute_force_oracle(q).status == Verdict::Status::kUnsat);
  CHECK(solve(q, 100).status == Verdict::Status::kUnsat);
}

TEST_CASE("oracle rejects oversized problems") {
  Rng rng(1);
  const Network big = random_relu_network(rng, 2, {7, 7}, 1);
  const Query q = feasibility_query(big, unit_box(2),
                                    {{{{{5, 0}, 1.0}}, Cmp::kGt, 0.0}});
  CHECK_THROWS_AS(brute_force_oracle(q), InputError);
}

TEST_CASE("solve vs oracle on random tiny networks") {
  Rng rng(909);
  int unknowns = 0, total = 0;
  for (int t = 0; t < 40; ++t) {
    const int inputs = 1 + static_cast<int>(rng.next_u64() % 3);
    const Network net = random_relu_network(rng, inputs, {3, 3}, 2, 0.9);
    const Box box = unit_box(inputs);
    std::vector<Query> queries;
    // A phase query (feasibility on the truncated net).
    const auto phase = build_phase_query(net, {2, 0}, rng.next_u64() % 2, box);
    for (const auto& q : phase) queries.push_back(q);
    // A forward query with a random line.
    queries.push_back(build_forward_query(
        net, {2, static_cast<int>(rng.next_u64() % 3)}, rng.uniform(0, 1),
        rng.uniform(-0.2, 0.2), 1 + static_cast<int>(rng.next_u64() % 2), box));
    // A result-preserving query with the zero line.
    queries.push_back(build_result_preserving_query(
        net, {4, static_cast<int>(rng.next_u64() % 3)}, 0.0, 0.0, 0.0, box));
    for (const Query& q : queries) {
      ++total;
      const Verdict got = solve(q, 10000);
      if (got.status == Verdict::Status::kUnknown) {
        ++unknowns;
        continue;
      }
      const Verdict want = brute_force_oracle(q);
      CHECK(got.status == want.status);
      if (got.status == Verdict::Status::kSat)
        CHECK(goal_holds_at(q, got.witness));
    }
  }
  CHECK(total > 0);
  CHECK(unknowns * 10 < total);  // UNKNOWN rate < 10%
}
