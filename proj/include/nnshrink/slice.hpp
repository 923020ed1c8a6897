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

#ifndef NNSHRINK_SLICE_HPP_
#define NNSHRINK_SLICE_HPP_

#include <optional>
#include <string>
#include <vector>

#include "nnshrink/pipeline.hpp"

namespace nnshrink {

// Per input dimension, the number of even sub-ranges.
struct SlicePlan {
  std::vector<int> splits;

  std::int64_t total() const;
};

struct FamilyEntry {
  Box box;
  Network network;
  std::optional<AffineMap> affine;  // set when the entry fully linearized
  bool simplified = false;          // false for pass-through entries
  SimplifyReport report;
};

// A sub-domain -> simplified-network map; together the entries are
// equivalent to the base network over the base box.
struct NetworkFamily {
  SlicePlan plan;
  Box base_box;
  std::vector<FamilyEntry> entries;  // row-major over the grid
};

// Row-major grid of sub-boxes. Slices own their lower edge; the last slice
// per dimension also owns the top edge. Boxes are stored closed, which is
// what the bound computations need.
std::vector<Box> slice_domain(const Box& box, const SlicePlan& plan);

// Simplifies the base network once per (selected) sub-domain. When
// `sample` is given, only those entry indices are simplified and the rest
// pass the original network through. Entries are independent, so up to
// `threads` of them run concurrently; the assembled family is identical
// either way.
NetworkFamily slice_and_simplify(const Network& net, const Box& box,
                                 const SlicePlan& plan,
                                 const PipelineConfig& config,
                                 const std::vector<std::int64_t>* sample = nullptr,
                                 int threads = 1);

// Sub-domain owning the input: floor index per dimension, top edge clamped.
std::int64_t route(const NetworkFamily& family, const std::vector<double>& x);

std::vector<double> family_evaluate(const NetworkFamily& family,
                                    const std::vector<double>& x);

struct EntryStats {
  std::int64_t index = 0;
  int removed = 0;
  int total = 0;
  bool fully_linear = false;
  double error_bound = 0.0;
};

struct LinearizationReport {
  std::vector<EntryStats> entries;
  double mean_removed_fraction = 0.0;
  double min_removed_fraction = 0.0;
  double max_removed_fraction = 0.0;
  int fully_linear_count = 0;
};

LinearizationReport linearization_report(const NetworkFamily& family);

nlohmann::json linearization_to_json(const LinearizationReport& report);

// Directory layout: manifest.json plus one entry_<index>.json per
// sub-domain (a network document, or {"affine": ...} for linearized ones).
void save_family(const NetworkFamily& family, const std::string& dir);
NetworkFamily load_family(const std::string& dir);

}  // namespace nnshrink

#endif  // NNSHRINK_SLICE_HPP_
