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

#include "nnshrink/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nnshrink {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Interval Interval::intersect(const Interval& other) const {
  Interval out{std::max(lo, other.lo), std::min(hi, other.hi)};
  // Two sound enclosures always overlap; a hairline inversion is fp noise.
  if (out.lo > out.hi) std::swap(out.lo, out.hi);
  return out;
}

bool Box::contains(const std::vector<double>& x) const {
  if (static_cast<int>(x.size()) != dim()) return false;
  for (int d = 0; d < dim(); ++d)
    if (!dims[d].contains(x[d])) return false;
  return true;
}

std::pair<Box, Box> Box::bisect(int d) const {
  Box a = *this, b = *this;
  const double mid = 0.5 * (dims[d].lo + dims[d].hi);
  a.dims[d].hi = mid;
  b.dims[d].lo = mid;
  return {a, b};
}

int Box::widest_dim() const {
  int best = 0;
  for (int d = 1; d < dim(); ++d)
    if (dims[d].width() > dims[best].width()) best = d;
  return best;
}

void LinForm::add(const NeuronRef& ref, double c) {
  if (c == 0.0) return;
  auto [it, inserted] = coeffs.try_emplace(ref, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0.0) coeffs.erase(it);
  }
}

void LinForm::add(const LinForm& other, double scale) {
  if (scale == 0.0) return;
  constant += scale * other.constant;
  for (const auto& [ref, c] : other.coeffs) add(ref, scale * c);
}

// --- interval propagation ----------------------------------------------------

namespace {

Interval ws_interval(const Neuron& n, const BoundsMap& bounds) {
  Interval out{n.bias, n.bias};
  for (const Term& t : n.terms) {
    const Interval& s = bounds.at(t.source);
    if (t.coeff >= 0) {
      out.lo += t.coeff * s.lo;
      out.hi += t.coeff * s.hi;
    } else {
      out.lo += t.coeff * s.hi;
      out.hi += t.coeff * s.lo;
    }
  }
  return out;
}

void check_box(const Network& net, const Box& box) {
  if (box.dim() != net.input_dim())
    throw InputError("bounds: box has " + std::to_string(box.dim()) +
                     " dimensions, network expects " +
                     std::to_string(net.input_dim()));
  for (const Interval& iv : box.dims)
    if (!(iv.lo <= iv.hi)) throw InputError("bounds: box interval with lo > hi");
}

}  // namespace

BoundsMap interval_bounds(const Network& net, const Box& box) {
  check_box(net, box);
  BoundsMap bounds;
  bounds.intervals.resize(net.layer_count());
  bounds.intervals[0] = box.dims;
  for (int l = 1; l < net.layer_count(); ++l) {
    bounds.intervals[l].resize(net.layer_size(l));
    for (int i = 0; i < net.layer_size(l); ++i) {
      const Neuron& n = net.layers[l][i];
      if (n.kind == Neuron::Kind::kWeightedSum) {
        bounds.intervals[l][i] = ws_interval(n, bounds);
      } else {
        const Interval& s = bounds.at(n.source);
        auto [lo, hi] = n.fn.range_on(s.lo, s.hi);
        bounds.intervals[l][i] = {lo, hi};
      }
    }
  }
  return bounds;
}

// --- symbolic envelopes --------------------------------------------------------

namespace {

// Chord of fn between (lo, fn(lo)) and (hi, fn(hi)), lifted just enough to
// dominate the function at every breakpoint inside. For convex pieces (ReLU)
// the lift is zero and this is the triangle relaxation's upper edge.
LinForm upper_relaxation(const PwlFn& fn, const NeuronRef& src, double lo,
                         double hi) {
  const double flo = fn(lo), fhi = fn(hi);
  const double slope = (fhi - flo) / (hi - lo);
  double lift = 0.0;
  for (std::size_t i = 1; i + 1 < fn.breakpoints.size(); ++i) {
    const double s = fn.breakpoints[i];
    if (s > lo && s < hi)
      lift = std::max(lift, fn(s) - (flo + slope * (s - lo)));
  }
  LinForm form;
  form.add(src, slope);
  form.constant = flo - slope * lo + lift;
  return form;
}

// Best piece line lying fully below fn on [lo, hi]; "best" maximizes the
// smaller endpoint value, which for ReLU always selects the zero piece.
// Falls back to the chord dropped below the function when no piece fits.
LinForm lower_relaxation(const PwlFn& fn, const NeuronRef& src, double lo,
                         double hi) {
  std::vector<double> points{lo, hi};
  for (std::size_t i = 1; i + 1 < fn.breakpoints.size(); ++i) {
    const double s = fn.breakpoints[i];
    if (s > lo && s < hi) points.push_back(s);
  }
  double best_score = -kInf;
  double best_a = 0.0, best_b = 0.0;
  bool found = false;
  for (int p = 0; p < fn.piece_count(); ++p) {
    if (fn.breakpoints[p + 1] <= lo || fn.breakpoints[p] >= hi)
      continue;  // piece does not meet the interval
    const double a = fn.slopes[p], b = fn.intercepts[p];
    bool below = true;
    for (double x : points)
      if (a * x + b > fn(x) + 1e-12) below = false;
    if (!below) continue;
    const double score = std::min(a * lo + b, a * hi + b);
    if (score > best_score) {
      best_score = score;
      best_a = a;
      best_b = b;
      found = true;
    }
  }
  if (!found) {
    const double flo = fn(lo), fhi = fn(hi);
    best_a = (fhi - flo) / (hi - lo);
    best_b = flo - best_a * lo;
    double drop = 0.0;
    for (double x : points) drop = std::max(drop, best_a * x + best_b - fn(x));
    best_b -= drop;
  }
  LinForm form;
  form.add(src, best_a);
  form.constant = best_b;
  return form;
}

}  // namespace

BoundAnalysis::BoundAnalysis(const Network& net, const Box& box)
    : net_(net), box_(box) {
  check_box(net, box);
  const int n = net.layer_count();
  bounds_.intervals.resize(n);
  lower_.resize(n);
  upper_.resize(n);
  bounds_.intervals[0] = box.dims;
  lower_[0].resize(net.input_dim());
  upper_[0].resize(net.input_dim());
  for (int i = 0; i < net.input_dim(); ++i) {
    LinForm self;
    self.add({0, i}, 1.0);
    lower_[0][i] = self;
    upper_[0][i] = self;
  }
  for (int l = 1; l < n; ++l) {
    const int size = net.layer_size(l);
    bounds_.intervals[l].resize(size);
    lower_[l].resize(size);
    upper_[l].resize(size);
    for (int i = 0; i < size; ++i) {
      const Neuron& neuron = net.layers[l][i];
      if (neuron.kind == Neuron::Kind::kWeightedSum) {
        LinForm exact;
        exact.constant = neuron.bias;
        for (const Term& t : neuron.terms) exact.add(t.source, t.coeff);
        lower_[l][i] = exact;
        upper_[l][i] = exact;
        Interval iv{concretize(exact, /*upper=*/false),
                    concretize(exact, /*upper=*/true)};
        bounds_.intervals[l][i] = iv.intersect(ws_interval(neuron, bounds_));
      } else {
        const Interval src = bounds_.at(neuron.source);
        const auto stable = neuron.fn.segment_containing(src.lo, src.hi);
        if (src.width() <= 0.0 && !stable.has_value()) {
          // Point interval outside every closed span (finite end breakpoint
          // with the outer piece extended): the value is still a constant.
          LinForm c;
          c.constant = neuron.fn(src.lo);
          lower_[l][i] = c;
          upper_[l][i] = c;
        } else if (stable.has_value()) {
          LinForm line;
          line.add(neuron.source, neuron.fn.slopes[*stable]);
          line.constant = neuron.fn.intercepts[*stable];
          lower_[l][i] = line;
          upper_[l][i] = line;
        } else {
          upper_[l][i] =
              upper_relaxation(neuron.fn, neuron.source, src.lo, src.hi);
          lower_[l][i] =
              lower_relaxation(neuron.fn, neuron.source, src.lo, src.hi);
        }
        Interval iv{concretize(lower_[l][i], false),
                    concretize(upper_[l][i], true)};
        auto [rlo, rhi] = neuron.fn.range_on(src.lo, src.hi);
        bounds_.intervals[l][i] = iv.intersect({rlo, rhi});
      }
    }
  }
}

// Back-substitutes the form down to the input layer, always replacing the
// latest remaining neuron first so that opposing paths cancel before their
// shared ancestor is expanded.
double BoundAnalysis::concretize(const LinForm& form, bool upper) const {
  LinForm cur = form;
  while (!cur.coeffs.empty()) {
    auto last = std::prev(cur.coeffs.end());
    const NeuronRef ref = last->first;
    if (ref.layer == 0) break;  // only input variables remain
    const double c = last->second;
    cur.coeffs.erase(last);
    const LinForm& env = (c >= 0) == upper ? upper_[ref.layer][ref.index]
                                           : lower_[ref.layer][ref.index];
    cur.add(env, c);
  }
  double acc = cur.constant;
  for (const auto& [ref, c] : cur.coeffs) {
    const Interval& iv = box_.dims[ref.index];
    acc += c * ((c >= 0) == upper ? iv.hi : iv.lo);
  }
  return acc;
}

Interval BoundAnalysis::bound_linear(const LinForm& form) const {
  Interval sym{concretize(form, false), concretize(form, true)};
  Interval direct{form.constant, form.constant};
  for (const auto& [ref, c] : form.coeffs) {
    const Interval& iv = bounds_.at(ref);
    if (c >= 0) {
      direct.lo += c * iv.lo;
      direct.hi += c * iv.hi;
    } else {
      direct.lo += c * iv.hi;
      direct.hi += c * iv.lo;
    }
  }
  return sym.intersect(direct);
}

BoundsMap symbolic_bounds(const Network& net, const Box& box) {
  return BoundAnalysis(net, box).bounds();
}

std::vector<Box> bisect_into(const Box& box, int leaves) {
  std::vector<Box> out{box};
  while (static_cast<int>(out.size()) < leaves) {
    std::size_t pick = 0;
    double widest = -1.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double w = out[i].dims[out[i].widest_dim()].width();
      if (w > widest) {
        widest = w;
        pick = i;
      }
    }
    if (widest <= 0.0) break;  // degenerate box, nothing left to split
    auto [a, b] = out[pick].bisect(out[pick].widest_dim());
    out[pick] = a;
    out.insert(out.begin() + pick + 1, b);
  }
  return out;
}

BoundsMap tighten(const Network& net, const Box& box, int budget,
                  BoundBackend backend) {
  if (budget < 1) throw InputError("tighten: budget must be >= 1");
  auto analyze = [&](const Box& b) {
    return backend == BoundBackend::kSymbolic ? symbolic_bounds(net, b)
                                              : interval_bounds(net, b);
  };
  BoundsMap base = analyze(box);
  if (budget == 1) return base;

  BoundsMap merged;
  bool first = true;
  for (const Box& leaf : bisect_into(box, budget)) {
    BoundsMap leaf_bounds = analyze(leaf);
    if (first) {
      merged = leaf_bounds;
      first = false;
      continue;
    }
    for (std::size_t l = 0; l < merged.intervals.size(); ++l) {
      for (std::size_t i = 0; i < merged.intervals[l].size(); ++i) {
        Interval& m = merged.intervals[l][i];
        const Interval& v = leaf_bounds.intervals[l][i];
        m.lo = std::min(m.lo, v.lo);
        m.hi = std::max(m.hi, v.hi);
      }
    }
  }
  // The union over leaves covers the box, so intersecting with the plain
  // pass keeps the result sound and never looser than it.
  for (std::size_t l = 0; l < merged.intervals.size(); ++l)
    for (std::size_t i = 0; i < merged.intervals[l].size(); ++i)
      merged.intervals[l][i] =
          merged.intervals[l][i].intersect(base.intervals[l][i]);
  return merged;
}

}  // namespace nnshrink
