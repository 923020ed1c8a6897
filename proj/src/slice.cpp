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

#include "nnshrink/slice.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <mutex>
#include <thread>

#include "nnshrink/json_io.hpp"

namespace nnshrink {

using nlohmann::json;

std::int64_t SlicePlan::total() const {
  std::int64_t n = 1;
  for (int s : splits) {
    if (s < 1) throw InputError("slice plan: split counts must be >= 1");
    n *= s;
  }
  return n;
}

std::vector<Box> slice_domain(const Box& box, const SlicePlan& plan) {
  if (static_cast<int>(plan.splits.size()) != box.dim())
    throw InputError("slice plan does not match the box dimension");
  const std::int64_t total = plan.total();
  std::vector<Box> out;
  out.reserve(total);
  std::vector<int> idx(box.dim(), 0);
  for (std::int64_t flat = 0; flat < total; ++flat) {
    Box sub = box;
    for (int d = 0; d < box.dim(); ++d) {
      const Interval& iv = box.dims[d];
      const int n = plan.splits[d];
      // Shared edges computed identically for both neighbours.
      sub.dims[d].lo = iv.lo + iv.width() * idx[d] / n;
      sub.dims[d].hi =
          idx[d] + 1 == n ? iv.hi : iv.lo + iv.width() * (idx[d] + 1) / n;
    }
    out.push_back(sub);
    // Row-major: the last dimension moves fastest.
    for (int d = box.dim() - 1; d >= 0; --d) {
      if (++idx[d] < plan.splits[d]) break;
      idx[d] = 0;
    }
  }
  return out;
}

NetworkFamily slice_and_simplify(const Network& net, const Box& box,
                                 const SlicePlan& plan,
                                 const PipelineConfig& config,
                                 const std::vector<std::int64_t>* sample,
                                 int threads) {
  NetworkFamily family;
  family.plan = plan;
  family.base_box = box;
  const std::vector<Box> boxes = slice_domain(box, plan);
  family.entries.resize(boxes.size());

  std::vector<bool> selected(boxes.size(), sample == nullptr);
  if (sample != nullptr) {
    for (std::int64_t i : *sample) {
      if (i < 0 || i >= static_cast<std::int64_t>(boxes.size()))
        throw InputError("sample index out of range: " + std::to_string(i));
      selected[i] = true;
    }
  }

  std::atomic<std::size_t> cursor{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    while (true) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= boxes.size()) return;
      try {
        FamilyEntry& entry = family.entries[i];
        entry.box = boxes[i];
        if (selected[i]) {
          auto [simplified, report] = simplify(net, boxes[i], config);
          entry.network = std::move(simplified);
          entry.report = std::move(report);
          entry.simplified = true;
        } else {
          entry.network = net;
          entry.report.mode = to_string(config.mode);
          entry.report.neurons_before = net.neuron_count();
          entry.report.neurons_after = net.neuron_count();
          entry.report.hidden_before = net.hidden_count();
          entry.report.hidden_after = net.hidden_count();
          entry.report.surviving = net.hidden_count();
        }
        entry.affine = to_affine(entry.network);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        cursor.store(boxes.size());
        return;
      }
    }
  };
  const int workers =
      std::max(1, std::min(threads, static_cast<int>(boxes.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return family;
}

std::int64_t route(const NetworkFamily& family, const std::vector<double>& x) {
  const Box& box = family.base_box;
  if (static_cast<int>(x.size()) != box.dim())
    throw InputError("route: input dimension mismatch");
  if (!box.contains(x))
    throw InputError("route: input outside the base box");
  std::int64_t flat = 0;
  for (int d = 0; d < box.dim(); ++d) {
    const Interval& iv = box.dims[d];
    const int n = family.plan.splits[d];
    int idx = iv.width() == 0.0
                  ? 0
                  : static_cast<int>(std::floor((x[d] - iv.lo) / iv.width() * n));
    idx = std::clamp(idx, 0, n - 1);
    flat = flat * n + idx;
  }
  return flat;
}

std::vector<double> family_evaluate(const NetworkFamily& family,
                                    const std::vector<double>& x) {
  const FamilyEntry& entry = family.entries[route(family, x)];
  if (entry.affine.has_value()) return entry.affine->apply(x);
  return evaluate(entry.network, x).outputs();
}

LinearizationReport linearization_report(const NetworkFamily& family) {
  LinearizationReport report;
  double sum = 0.0;
  report.min_removed_fraction = 1.0;
  report.max_removed_fraction = 0.0;
  for (std::size_t i = 0; i < family.entries.size(); ++i) {
    const FamilyEntry& e = family.entries[i];
    EntryStats stats;
    stats.index = static_cast<std::int64_t>(i);
    stats.total = e.report.hidden_before;
    stats.removed = e.report.hidden_before - e.report.hidden_after;
    stats.fully_linear = e.affine.has_value();
    stats.error_bound = e.report.error_headline;
    if (stats.fully_linear) ++report.fully_linear_count;
    const double frac =
        stats.total == 0 ? 1.0 : double(stats.removed) / stats.total;
    sum += frac;
    report.min_removed_fraction = std::min(report.min_removed_fraction, frac);
    report.max_removed_fraction = std::max(report.max_removed_fraction, frac);
    report.entries.push_back(stats);
  }
  if (!family.entries.empty())
    report.mean_removed_fraction = sum / family.entries.size();
  return report;
}

json linearization_to_json(const LinearizationReport& report) {
  json entries = json::array();
  for (const EntryStats& s : report.entries)
    entries.push_back({{"index", s.index},
                       {"removed", s.removed},
                       {"total", s.total},
                       {"fully_linear", s.fully_linear},
                       {"error_bound", s.error_bound}});
  return json{{"entries", std::move(entries)},
              {"mean_removed_fraction", report.mean_removed_fraction},
              {"min_removed_fraction", report.min_removed_fraction},
              {"max_removed_fraction", report.max_removed_fraction},
              {"fully_linear_count", report.fully_linear_count}};
}

void save_family(const NetworkFamily& family, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create directory: " + dir);

  json entries = json::array();
  for (std::size_t i = 0; i < family.entries.size(); ++i) {
    const FamilyEntry& e = family.entries[i];
    const std::string file = "entry_" + std::to_string(i) + ".json";
    json doc = e.affine.has_value() ? affine_to_json(*e.affine)
                                    : network_to_json(e.network);
    doc["report"] = report_to_json(e.report);
    doc["simplified"] = e.simplified;
    write_json_file((fs::path(dir) / file).string(), doc);
    entries.push_back({{"index", static_cast<std::int64_t>(i)},
                       {"path", file},
                       {"fully_linear", e.affine.has_value()},
                       {"error_bound", e.report.error_headline}});
  }
  json manifest{{"plan", family.plan.splits},
                {"box", box_to_json(family.base_box)},
                {"entries", std::move(entries)}};
  write_json_file((fs::path(dir) / "manifest.json").string(), manifest);
}

NetworkFamily load_family(const std::string& dir) {
  namespace fs = std::filesystem;
  const json manifest = load_json_file((fs::path(dir) / "manifest.json").string());
  NetworkFamily family;
  if (!manifest.contains("plan") || !manifest["plan"].is_array())
    throw InputError("family manifest: missing plan");
  for (const auto& s : manifest["plan"])
    family.plan.splits.push_back(s.get<int>());
  family.base_box = box_from_json(manifest.at("box"));
  const std::vector<Box> boxes = slice_domain(family.base_box, family.plan);
  family.entries.resize(boxes.size());
  for (const auto& je : manifest.at("entries")) {
    const std::int64_t index = je.at("index").get<std::int64_t>();
    if (index < 0 || index >= static_cast<std::int64_t>(boxes.size()))
      throw InputError("family manifest: entry index out of range");
    FamilyEntry& entry = family.entries[index];
    entry.box = boxes[index];
    const json doc =
        load_json_file((fs::path(dir) / je.at("path").get<std::string>()).string());
    if (doc.contains("affine")) {
      entry.affine = affine_from_json(doc);
      // A placeholder network keeps the entry evaluable and serializable.
      entry.network = Network{};
    } else {
      entry.network = network_from_json(doc);
      entry.affine = to_affine(entry.network);
    }
    if (doc.contains("simplified"))
      entry.simplified = doc["simplified"].get<bool>();
    entry.report.error_headline = je.at("error_bound").get<double>();
    if (doc.contains("report") && doc["report"].contains("size")) {
      const json& size = doc["report"]["size"];
      entry.report.neurons_before = size.value("neurons_before", 0);
      entry.report.neurons_after = size.value("neurons_after", 0);
      entry.report.hidden_before = size.value("hidden_before", 0);
      entry.report.hidden_after = size.value("hidden_after", 0);
    }
  }
  return family;
}

}  // namespace nnshrink
