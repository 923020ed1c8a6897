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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "nnshrink/verify.hpp"

// Exhaustive decision procedure for tiny queries, kept deliberately
// independent of the branch-and-bound path: fix a linear segment for every
// activation neuron, under which the whole network is one affine map, and
// decide the resulting linear system by enumerating polytope vertices.

namespace nnshrink {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFeasTol = 1e-9;

struct AffForm {
  std::vector<double> w;
  double c = 0.0;
};

// a . x <= b, or strictly < b.
struct HalfSpace {
  std::vector<double> a;
  double b = 0.0;
  bool strict = false;
};

double dot(const std::vector<double>& a, const std::vector<double>& x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * x[i];
  return acc;
}

// f(x) <= rhs over the box, for every x.
bool trivially_true(const HalfSpace& h, const Box& box) {
  double mx = 0.0;
  for (int d = 0; d < box.dim(); ++d)
    mx += h.a[d] >= 0 ? h.a[d] * box.dims[d].hi : h.a[d] * box.dims[d].lo;
  return h.strict ? mx < h.b : mx <= h.b;
}

bool trivially_false(const HalfSpace& h, const Box& box) {
  double mn = 0.0;
  for (int d = 0; d < box.dim(); ++d)
    mn += h.a[d] >= 0 ? h.a[d] * box.dims[d].lo : h.a[d] * box.dims[d].hi;
  return h.strict ? mn >= h.b : mn > h.b;
}

bool satisfied_closed(const std::vector<HalfSpace>& sys,
                      const std::vector<double>& x) {
  for (const HalfSpace& h : sys)
    if (dot(h.a, x) > h.b + kFeasTol) return false;
  return true;
}

// Solves the d x d system rows . x = rhs by Gaussian elimination; false on
// (near-)singular systems.
bool solve_square(std::vector<std::vector<double>> rows,
                  std::vector<double> rhs, std::vector<double>& x) {
  const int d = static_cast<int>(rhs.size());
  for (int col = 0; col < d; ++col) {
    int pivot = col;
    for (int r = col + 1; r < d; ++r)
      if (std::abs(rows[r][col]) > std::abs(rows[pivot][col])) pivot = r;
    if (std::abs(rows[pivot][col]) < 1e-11) return false;
    std::swap(rows[pivot], rows[col]);
    std::swap(rhs[pivot], rhs[col]);
    for (int r = 0; r < d; ++r) {
      if (r == col) continue;
      const double f = rows[r][col] / rows[col][col];
      for (int c2 = col; c2 < d; ++c2) rows[r][c2] -= f * rows[col][c2];
      rhs[r] -= f * rhs[col];
    }
  }
  x.resize(d);
  for (int i = 0; i < d; ++i) x[i] = rhs[i] / rows[i][i];
  return true;
}

// All vertices of {x in box : sys} via d-subsets of the active hyperplanes.
// `first_only` stops at the first feasible vertex.
std::vector<std::vector<double>> polytope_vertices(
    const std::vector<HalfSpace>& sys, const Box& box, bool first_only) {
  const int d = box.dim();
  std::vector<std::vector<double>> planes;  // a . x = b
  std::vector<double> offsets;
  for (const HalfSpace& h : sys) {
    planes.push_back(h.a);
    offsets.push_back(h.b);
  }
  for (int dim = 0; dim < d; ++dim) {
    std::vector<double> unit(d, 0.0);
    unit[dim] = 1.0;
    planes.push_back(unit);
    offsets.push_back(box.dims[dim].hi);
    planes.push_back(unit);
    offsets.push_back(box.dims[dim].lo);
  }

  std::vector<std::vector<double>> vertices;
  const int n = static_cast<int>(planes.size());
  std::vector<int> combo(d);
  auto try_combo = [&]() {
    std::vector<std::vector<double>> rows;
    std::vector<double> rhs;
    for (int idx : combo) {
      rows.push_back(planes[idx]);
      rhs.push_back(offsets[idx]);
    }
    std::vector<double> x;
    if (!solve_square(std::move(rows), std::move(rhs), x)) return false;
    for (int dim = 0; dim < d; ++dim)
      if (x[dim] < box.dims[dim].lo - kFeasTol ||
          x[dim] > box.dims[dim].hi + kFeasTol)
        return false;
    if (!satisfied_closed(sys, x)) return false;
    for (int dim = 0; dim < d; ++dim)
      x[dim] = std::clamp(x[dim], box.dims[dim].lo, box.dims[dim].hi);
    vertices.push_back(std::move(x));
    return true;
  };

  // Iterate over all size-d index combinations.
  for (int i = 0; i < d; ++i) combo[i] = i;
  if (n < d) return vertices;
  while (true) {
    if (try_combo() && first_only) return vertices;
    int pos = d - 1;
    while (pos >= 0 && combo[pos] == n - d + pos) --pos;
    if (pos < 0) break;
    ++combo[pos];
    for (int i = pos + 1; i < d; ++i) combo[i] = combo[i - 1] + 1;
  }
  return vertices;
}

struct AssignmentContext {
  std::vector<AffForm> forms_flat;  // indexed by flat neuron index
  std::vector<HalfSpace> segment_sys;
};

int flat_index(const Network& net, const NeuronRef& ref) {
  int base = 0;
  for (int l = 0; l < ref.layer; ++l) base += net.layer_size(l);
  return base + ref.index;
}

HalfSpace upper_halfspace(const AffForm& f, double rhs, bool strict) {
  return {f.w, rhs - f.c, strict};
}

HalfSpace lower_halfspace(const AffForm& f, double rhs, bool strict) {
  std::vector<double> neg(f.w);
  for (double& v : neg) v = -v;
  return {std::move(neg), f.c - rhs, strict};
}

// Tiny deterministic generator for interior sampling.
struct SplitMix {
  std::uint64_t state;
  explicit SplitMix(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double uniform() { return (next() >> 11) * 0x1.0p-53; }
};

}  // namespace

Verdict brute_force_oracle(const Query& query) {
  const Network& net = query.network;
  const Box& box = query.box;
  if (box.dim() > 3)
    throw InputError("brute_force_oracle: supports at most 3 input dimensions");

  std::vector<NeuronRef> activations;
  for (int l = 0; l < net.layer_count(); ++l)
    for (int i = 0; i < net.layer_size(l); ++i)
      if (net.layers[l][i].kind == Neuron::Kind::kActivation)
        activations.push_back({l, i});
  if (activations.size() > 12)
    throw InputError("brute_force_oracle: more than 12 activation neurons");

  Verdict verdict;
  verdict.status = Verdict::Status::kUnsat;

  auto report_sat = [&](const std::vector<double>& x) {
    verdict.status = Verdict::Status::kSat;
    verdict.witness = x;
  };

  // Cheap pass first: a concrete satisfying point settles SAT immediately.
  {
    SplitMix rng(0x5eed5eedULL);
    const int grid = box.dim() == 1 ? 257 : (box.dim() == 2 ? 33 : 11);
    std::vector<int> idx(box.dim(), 0);
    while (true) {
      std::vector<double> x(box.dim());
      for (int d = 0; d < box.dim(); ++d) {
        const Interval& iv = box.dims[d];
        x[d] = grid == 1 ? iv.lo : iv.lo + iv.width() * idx[d] / (grid - 1);
      }
      if (goal_holds_at(query, x)) {
        report_sat(x);
        return verdict;
      }
      int d = 0;
      while (d < box.dim() && ++idx[d] == grid) idx[d++] = 0;
      if (d == box.dim()) break;
    }
    for (int k = 0; k < 500; ++k) {
      std::vector<double> x(box.dim());
      for (int d = 0; d < box.dim(); ++d)
        x[d] = box.dims[d].lo + box.dims[d].width() * rng.uniform();
      if (goal_holds_at(query, x)) {
        report_sat(x);
        return verdict;
      }
    }
  }

  // Segments compatible with sound interval bounds, per activation.
  const BoundsMap rough = interval_bounds(net, box);
  std::vector<std::vector<int>> options;
  std::uint64_t combinations = 1;
  for (const NeuronRef& ref : activations) {
    const PwlFn& fn = net.at(ref).fn;
    const Interval src = rough.at(net.at(ref).source);
    std::vector<int> ok;
    for (int p = 0; p < fn.piece_count(); ++p) {
      // Outermost pieces extend past finite end breakpoints, matching
      // evaluation.
      const double eff_lo = p == 0 ? -kInf : fn.breakpoints[p];
      const double eff_hi =
          p == fn.piece_count() - 1 ? kInf : fn.breakpoints[p + 1];
      if (eff_lo <= src.hi && eff_hi >= src.lo) ok.push_back(p);
    }
    options.push_back(ok);
    combinations *= std::max<std::uint64_t>(1, ok.size());
    if (combinations > (1u << 22))
      throw InputError("brute_force_oracle: too many segment combinations");
  }

  const int total_neurons = flat_index(net, {net.layer_count() - 1, 0}) +
                            net.layer_size(net.layer_count() - 1);
  std::vector<int> choice(activations.size(), 0);

  auto build_context = [&](AssignmentContext& ctx) -> bool {
    ctx.forms_flat.assign(total_neurons, AffForm{});
    ctx.segment_sys.clear();
    std::size_t act_i = 0;
    for (int l = 0; l < net.layer_count(); ++l) {
      for (int i = 0; i < net.layer_size(l); ++i) {
        const Neuron& n = net.layers[l][i];
        AffForm f;
        f.w.assign(box.dim(), 0.0);
        if (n.kind == Neuron::Kind::kInput) {
          f.w[i] = 1.0;
        } else if (n.kind == Neuron::Kind::kWeightedSum) {
          f.c = n.bias;
          for (const Term& t : n.terms) {
            const AffForm& src = ctx.forms_flat[flat_index(net, t.source)];
            for (int d = 0; d < box.dim(); ++d) f.w[d] += t.coeff * src.w[d];
            f.c += t.coeff * src.c;
          }
        } else {
          const int seg = options[act_i].empty()
                              ? 0
                              : options[act_i][choice[act_i]];
          ++act_i;
          const AffForm& src = ctx.forms_flat[flat_index(net, n.source)];
          const double lo = seg == 0 ? -kInf : n.fn.breakpoints[seg];
          const double hi = seg == n.fn.piece_count() - 1
                                ? kInf
                                : n.fn.breakpoints[seg + 1];
          if (std::isfinite(lo)) {
            HalfSpace h = lower_halfspace(src, lo, false);
            if (trivially_false(h, box)) return false;
            if (!trivially_true(h, box)) ctx.segment_sys.push_back(std::move(h));
          }
          if (std::isfinite(hi)) {
            HalfSpace h = upper_halfspace(src, hi, false);
            if (trivially_false(h, box)) return false;
            if (!trivially_true(h, box)) ctx.segment_sys.push_back(std::move(h));
          }
          const double a = n.fn.slopes[seg], b = n.fn.intercepts[seg];
          for (int d = 0; d < box.dim(); ++d) f.w[d] = a * src.w[d];
          f.c = a * src.c + b;
        }
        ctx.forms_flat[flat_index(net, {l, i})] = std::move(f);
      }
    }
    return true;
  };

  auto disjuncts_for_goal =
      [&](const AssignmentContext& ctx) -> std::vector<std::vector<HalfSpace>> {
    std::vector<std::vector<HalfSpace>> out;
    if (const auto* goal = std::get_if<FeasibilityGoal>(&query.goal)) {
      std::vector<HalfSpace> sys;
      for (const LinearConstraint& c : goal->constraints) {
        AffForm f;
        f.w.assign(box.dim(), 0.0);
        for (const Term& t : c.terms) {
          const AffForm& src = ctx.forms_flat[flat_index(net, t.source)];
          for (int d = 0; d < box.dim(); ++d) f.w[d] += t.coeff * src.w[d];
          f.c += t.coeff * src.c;
        }
        switch (c.cmp) {
          case Cmp::kLt: sys.push_back(upper_halfspace(f, c.rhs, true)); break;
          case Cmp::kLe: sys.push_back(upper_halfspace(f, c.rhs, false)); break;
          case Cmp::kGt: sys.push_back(lower_halfspace(f, c.rhs, true)); break;
          case Cmp::kGe: sys.push_back(lower_halfspace(f, c.rhs, false)); break;
        }
      }
      out.push_back(std::move(sys));
      return out;
    }
    if (const auto* goal = std::get_if<LayerMismatchGoal>(&query.goal)) {
      for (const PairedNeuron& p : goal->pairs) {
        const AffForm& o = ctx.forms_flat[flat_index(net, p.original)];
        const AffForm& t = ctx.forms_flat[flat_index(net, p.twin)];
        AffForm diff;
        diff.w.resize(box.dim());
        for (int d = 0; d < box.dim(); ++d) diff.w[d] = o.w[d] - t.w[d];
        diff.c = o.c - t.c;
        out.push_back({lower_halfspace(diff, goal->tau, true)});
        out.push_back({upper_halfspace(diff, -goal->tau, true)});
      }
      return out;
    }
    const auto& goal = std::get<ArgmaxMismatchGoal>(query.goal);
    const int m = static_cast<int>(goal.outputs.size());
    for (int w = 0; w < m; ++w) {
      for (int j = 0; j < m; ++j) {
        if (j == w) continue;
        std::vector<HalfSpace> sys;
        for (int j2 = 0; j2 < m; ++j2) {
          if (j2 == w) continue;
          const AffForm& ow = ctx.forms_flat[flat_index(net, goal.outputs[w].original)];
          const AffForm& oj = ctx.forms_flat[flat_index(net, goal.outputs[j2].original)];
          AffForm diff;
          diff.w.resize(box.dim());
          for (int d = 0; d < box.dim(); ++d) diff.w[d] = ow.w[d] - oj.w[d];
          diff.c = ow.c - oj.c;
          sys.push_back(lower_halfspace(diff, goal.delta, true));
        }
        const AffForm& tj = ctx.forms_flat[flat_index(net, goal.outputs[j].twin)];
        const AffForm& tw = ctx.forms_flat[flat_index(net, goal.outputs[w].twin)];
        AffForm diff;
        diff.w.resize(box.dim());
        for (int d = 0; d < box.dim(); ++d) diff.w[d] = tj.w[d] - tw.w[d];
        diff.c = tj.c - tw.c;
        sys.push_back(lower_halfspace(diff, 0.0, /*strict=*/j > w));
        out.push_back(std::move(sys));
      }
    }
    return out;
  };

  // Looks for a concrete point of the polytope that satisfies the real goal.
  auto probe_polytope = [&](const std::vector<HalfSpace>& sys) -> bool {
    auto vertices = polytope_vertices(sys, box, /*first_only=*/false);
    if (vertices.empty()) return false;
    std::vector<std::vector<double>> candidates;
    std::vector<double> centroid(box.dim(), 0.0);
    for (const auto& v : vertices)
      for (int d = 0; d < box.dim(); ++d) centroid[d] += v[d] / vertices.size();
    candidates.push_back(centroid);
    for (const auto& v : vertices) {
      std::vector<double> nudged(box.dim());
      for (int d = 0; d < box.dim(); ++d)
        nudged[d] = 0.99 * v[d] + 0.01 * centroid[d];
      candidates.push_back(std::move(nudged));
    }
    candidates.insert(candidates.end(), vertices.begin(), vertices.end());
    SplitMix rng(0xfeedbeefULL);
    for (int k = 0; k < 200; ++k) {
      std::vector<double> x(box.dim(), 0.0);
      double total = 0.0;
      std::vector<double> weights(vertices.size());
      for (std::size_t i = 0; i < vertices.size(); ++i) {
        weights[i] = rng.uniform() + 1e-6;
        total += weights[i];
      }
      for (std::size_t i = 0; i < vertices.size(); ++i)
        for (int d = 0; d < box.dim(); ++d)
          x[d] += vertices[i][d] * weights[i] / total;
      candidates.push_back(std::move(x));
    }
    for (const auto& x : candidates) {
      if (box.contains(x) && goal_holds_at(query, x)) {
        report_sat(x);
        return true;
      }
    }
    return false;
  };

  while (true) {
    AssignmentContext ctx;
    if (build_context(ctx)) {
      bool region_ok = true;
      if (!ctx.segment_sys.empty() &&
          polytope_vertices(ctx.segment_sys, box, /*first_only=*/true).empty())
        region_ok = false;
      if (region_ok) {
        for (auto& disjunct : disjuncts_for_goal(ctx)) {
          std::vector<HalfSpace> sys = ctx.segment_sys;
          bool dead = false;
          for (HalfSpace& h : disjunct) {
            if (trivially_false(h, box)) {
              dead = true;
              break;
            }
            if (!trivially_true(h, box)) sys.push_back(std::move(h));
          }
          if (dead) continue;
          if (probe_polytope(sys)) return verdict;
        }
      }
    }
    // Advance the assignment odometer.
    std::size_t pos = 0;
    while (pos < choice.size()) {
      const std::size_t limit = std::max<std::size_t>(1, options[pos].size());
      if (++choice[pos] < static_cast<int>(limit)) break;
      choice[pos++] = 0;
    }
    if (pos == choice.size()) break;
  }
  return verdict;
}

}  // namespace nnshrink
