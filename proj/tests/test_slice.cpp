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
#include <filesystem>

#include "doctest.h"
#include "nnshrink/json_io.hpp"
#include "nnshrink/slice.hpp"
#include "test_util.hpp"

using namespace nnshrink;
using namespace nnshrink::testing;

TEST_CASE("slice_domain: one dimension, two halves") {
  const auto boxes = slice_domain(unit_box(1, 0.0, 1.0), {{2}});
  REQUIRE(boxes.size() == 2);
  CHECK(boxes[0].dims[0].lo == 0.0);
  CHECK(boxes[0].dims[0].hi == 0.5);
  CHECK(boxes[1].dims[0].lo == 0.5);
  CHECK(boxes[1].dims[0].hi == 1.0);
}

TEST_CASE("slice_domain: row-major 2x2 grid") {
  const auto boxes = slice_domain(unit_box(2, 0.0, 1.0), {{2, 2}});
  REQUIRE(boxes.size() == 4);
  // Row-major: the second dimension moves fastest.
  CHECK(boxes[0].dims[0].lo == 0.0);
  CHECK(boxes[0].dims[1].lo == 0.0);
  CHECK(boxes[1].dims[0].lo == 0.0);
  CHECK(boxes[1].dims[1].lo == 0.5);
  CHECK(boxes[2].dims[0].lo == 0.5);
  CHECK(boxes[2].dims[1].lo == 0.0);
}

TEST_CASE("slice_domain: 5 dims split 8 ways each gives 32768 sub-boxes") {
  SlicePlan plan;
  plan.splits.assign(5, 8);
  CHECK(plan.total() == 32768);
  const auto boxes = slice_domain(unit_box(5), plan);
  CHECK(boxes.size() == 32768);
}

TEST_CASE("route: half-open ownership with a clamped top edge") {
  NetworkFamily family;
  family.plan.splits = {2};
  family.base_box = unit_box(1, 0.0, 1.0);
  family.entries.resize(2);
  CHECK(route(family, {0.25}) == 0);
  CHECK(route(family, {0.5}) == 1);   // lower edge belongs to the upper slice
  CHECK(route(family, {1.0}) == 1);   // top edge clamps in
  CHECK_THROWS_AS(route(family, {1.0000001}), InputError);
  CHECK_THROWS_AS(route(family, {-0.0000001}), InputError);
}

TEST_CASE("route partition property on random inputs") {
  NetworkFamily family;
  family.plan.splits = {3, 4};
  family.base_box = unit_box(2);
  family.entries.resize(12);
  const auto boxes = slice_domain(family.base_box, family.plan);
  Rng rng(300);
  for (int i = 0; i < 10000; ++i) {
    const auto x = rng.in_box(family.base_box);
    const std::int64_t idx = route(family, x);
    REQUIRE(idx >= 0);
    REQUIRE(idx < 12);
    CHECK(boxes[idx].contains(x));
  }
}

TEST_CASE("plan of all ones is plain simplify") {
  const Network net = fig3_network();
  PipelineConfig config;
  config.sim_samples = 5000;
  NetworkFamily family =
      slice_and_simplify(net, unit_box(1), {{1}}, config);
  REQUIRE(family.entries.size() == 1);
  CHECK(family.entries[0].simplified);
  auto [direct, report] = simplify(net, unit_box(1), config);
  CHECK(serialize_network(family.entries[0].network) ==
        serialize_network(direct));
}

TEST_CASE("fig4 sliced at n=4: the leftmost slice fully linearizes") {
  const Network net = fig4_network();
  PipelineConfig config;
  config.sim_samples = 5000;
  NetworkFamily family = slice_and_simplify(net, unit_box(1), {{4}}, config);
  REQUIRE(family.entries.size() == 4);
  // On [-1,-0.5) both relu sources stay at or below -0.3: inactive, so the
  // whole entry collapses to an affine map.
  CHECK(family.entries[0].affine.has_value());
  const auto lin = linearization_report(family);
  CHECK(lin.entries[0].fully_linear);
  CHECK(lin.fully_linear_count >= 1);

  // Together-equivalence for the exact slices: family output tracks the
  // original everywhere (this net's slices are all exactly simplified).
  Rng rng(42);
  for (int i = 0; i < 10000; ++i) {
    const auto x = rng.in_box(unit_box(1));
    const auto a = evaluate(net, x).outputs();
    const auto b = family_evaluate(family, x);
    for (std::size_t c = 0; c < a.size(); ++c)
      CHECK(std::abs(a[c] - b[c]) <=
            kEquivRelTol * (1.0 + std::abs(a[c])));
  }
}

TEST_CASE("sampled slicing leaves unselected entries as pass-through") {
  const Network net = fig4_network();
  PipelineConfig config;
  config.sim_samples = 2000;
  const std::vector<std::int64_t> sample{1, 3};
  NetworkFamily family =
      slice_and_simplify(net, unit_box(1), {{4}}, config, &sample);
  CHECK(!family.entries[0].simplified);
  CHECK(family.entries[1].simplified);
  CHECK(!family.entries[2].simplified);
  CHECK(family.entries[3].simplified);
  // Pass-through entries still evaluate like the base network.
  const auto a = evaluate(net, {-0.9}).outputs();
  const auto b = family_evaluate(family, {-0.9});
  CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-12));
}

TEST_CASE("sub-box bounds are contained in parent-box bounds") {
  const Network net = fig4_network();
  const Box parent = unit_box(1);
  const BoundsMap outer = tighten(net, parent, 64);
  for (const Box& sub : slice_domain(parent, {{4}})) {
    const BoundsMap inner = tighten(net, sub, 64);
    for (int l = 0; l < net.layer_count(); ++l)
      for (int i = 0; i < net.layer_size(l); ++i) {
        CHECK(inner.intervals[l][i].lo >= outer.intervals[l][i].lo - 1e-9);
        CHECK(inner.intervals[l][i].hi <= outer.intervals[l][i].hi + 1e-9);
      }
  }
}

TEST_CASE("family save/load round trip preserves routing and outputs") {
  const Network net = fig4_network();
  PipelineConfig config;
  config.sim_samples = 2000;
  NetworkFamily family = slice_and_simplify(net, unit_box(1), {{4}}, config);
  const std::string dir =
      (std::filesystem::temp_directory_path() / "nnshrink_family_test").string();
  save_family(family, dir);
  CHECK(std::filesystem::exists(dir + "/manifest.json"));
  const NetworkFamily loaded = load_family(dir);
  REQUIRE(loaded.entries.size() == family.entries.size());
  Rng rng(9);
  for (int i = 0; i < 2000; ++i) {
    const auto x = rng.in_box(unit_box(1));
    const auto a = family_evaluate(family, x);
    const auto b = family_evaluate(loaded, x);
    for (std::size_t c = 0; c < a.size(); ++c)
      CHECK(a[c] == doctest::Approx(b[c]).epsilon(1e-12));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("multithreaded slicing assembles the same family") {
  const Network net = fig4_network();
  PipelineConfig config;
  config.sim_samples = 2000;
  NetworkFamily a = slice_and_simplify(net, unit_box(1), {{4}}, config,
                                       nullptr, /*threads=*/1);
  NetworkFamily b = slice_and_simplify(net, unit_box(1), {{4}}, config,
                                       nullptr, /*threads=*/4);
  REQUIRE(a.entries.size() == b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    CHECK(a.entries[i].affine.has_value() == b.entries[i].affine.has_value());
    if (!a.entries[i].affine.has_value())
      CHECK(serialize_network(a.entries[i].network) ==
            serialize_network(b.entries[i].network));
  }
}

TEST_CASE("relaxed-mode family drifts no further than each entry's ledger") {
  const Network net = fig4_network();
  PipelineConfig config;
  config.mode = SimplifyMode::kRelaxed;
  config.error_budget = 5e-2;
  config.sim_samples = 2000;
  NetworkFamily family = slice_and_simplify(net, unit_box(1), {{4}}, config);
  Rng rng(21);
  for (int i = 0; i < 10000; ++i) {
    const auto x = rng.in_box(unit_box(1));
    const std::int64_t idx = route(family, x);
    const auto a = evaluate(net, x).outputs();
    const auto b = family_evaluate(family, x);
    const double bound = family.entries[idx].report.error_headline;
    for (std::size_t c = 0; c < a.size(); ++c)
      CHECK(std::abs(a[c] - b[c]) <= bound + 1e-9);
  }
}

TEST_CASE("linearization report on an untouched family") {
  const Network net = fig4_network();
  PipelineConfig config;
  const std::vector<std::int64_t> sample;  // nothing selected
  NetworkFamily family =
      slice_and_simplify(net, unit_box(1), {{2}}, config, &sample);
  const auto lin = linearization_report(family);
  CHECK(lin.fully_linear_count == 0);
  CHECK(lin.mean_removed_fraction == 0.0);
}
