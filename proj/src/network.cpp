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

#include "nnshrink/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace nnshrink {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::string to_string(const NeuronRef& ref) {
  std::ostringstream out;
  out << "L" << ref.layer << "#" << ref.index;
  return out.str();
}

// --- PwlFn ------------------------------------------------------------------

PwlFn PwlFn::relu() {
  PwlFn fn;
  fn.breakpoints = {-kInf, 0.0, kInf};
  fn.slopes = {0.0, 1.0};
  fn.intercepts = {0.0, 0.0};
  return fn;
}

bool PwlFn::is_relu() const {
  return breakpoints.size() == 3 && breakpoints[0] == -kInf &&
         breakpoints[1] == 0.0 && breakpoints[2] == kInf && slopes[0] == 0.0 &&
         slopes[1] == 1.0 && intercepts[0] == 0.0 && intercepts[1] == 0.0;
}

int PwlFn::segment_of(double x) const {
  const int k = piece_count();
  for (int i = 0; i < k - 1; ++i) {
    if (x < breakpoints[i + 1]) return i;
  }
  return k - 1;
}

double PwlFn::operator()(double x) const {
  const int i = segment_of(x);
  return slopes[i] * x + intercepts[i];
}

std::optional<int> PwlFn::segment_containing(double lo, double hi) const {
  for (int i = 0; i < piece_count(); ++i) {
    if (breakpoints[i] <= lo && hi <= breakpoints[i + 1]) return i;
  }
  return std::nullopt;
}

std::pair<double, double> PwlFn::range_on(double lo, double hi) const {
  double mn = std::min((*this)(lo), (*this)(hi));
  double mx = std::max((*this)(lo), (*this)(hi));
  for (std::size_t i = 1; i + 1 < breakpoints.size(); ++i) {
    const double s = breakpoints[i];
    if (s > lo && s < hi) {
      const double v = (*this)(s);
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
  }
  return {mn, mx};
}

double PwlFn::max_slope() const {
  return *std::max_element(slopes.begin(), slopes.end());
}

double PwlFn::min_slope() const {
  return *std::min_element(slopes.begin(), slopes.end());
}

double PwlFn::max_abs_slope() const {
  double m = 0.0;
  for (double a : slopes) m = std::max(m, std::abs(a));
  return m;
}

// --- Neuron / Network -------------------------------------------------------

Neuron Neuron::input() {
  Neuron n;
  n.kind = Kind::kInput;
  return n;
}

Neuron Neuron::weighted_sum(double bias, std::vector<Term> terms) {
  Neuron n;
  n.kind = Kind::kWeightedSum;
  n.bias = bias;
  n.terms = std::move(terms);
  return n;
}

Neuron Neuron::activation(NeuronRef source, PwlFn fn) {
  Neuron n;
  n.kind = Kind::kActivation;
  n.source = source;
  n.fn = std::move(fn);
  return n;
}

int Network::neuron_count() const {
  int total = 0;
  for (const auto& layer : layers) total += static_cast<int>(layer.size());
  return total;
}

int Network::hidden_count() const {
  int total = 0;
  for (int l = 1; l + 1 < layer_count(); ++l) total += layer_size(l);
  return total;
}

bool Network::contains(const NeuronRef& ref) const {
  return ref.layer >= 0 && ref.layer < layer_count() && ref.index >= 0 &&
         ref.index < layer_size(ref.layer);
}

const Neuron& Network::at(const NeuronRef& ref) const {
  if (!contains(ref)) throw InputError("no such neuron: " + to_string(ref));
  return layers[ref.layer][ref.index];
}

Neuron& Network::at(const NeuronRef& ref) {
  if (!contains(ref)) throw InputError("no such neuron: " + to_string(ref));
  return layers[ref.layer][ref.index];
}

void Network::assign_ids() {
  next_id = 0;
  for (auto& layer : layers)
    for (auto& neuron : layer) neuron.id = next_id++;
}

std::optional<NeuronRef> Network::find_by_id(std::int64_t id) const {
  for (int l = 0; l < layer_count(); ++l)
    for (int i = 0; i < layer_size(l); ++i)
      if (layers[l][i].id == id) return NeuronRef{l, i};
  return std::nullopt;
}

// --- evaluate ----------------------------------------------------------------

LayerTrace evaluate(const Network& net, const std::vector<double>& input) {
  if (static_cast<int>(input.size()) != net.input_dim()) {
    throw InputError("evaluate: input has " + std::to_string(input.size()) +
                     " values, network expects " +
                     std::to_string(net.input_dim()));
  }
  LayerTrace trace;
  trace.values.resize(net.layer_count());
  trace.values[0] = input;
  for (int l = 1; l < net.layer_count(); ++l) {
    auto& row = trace.values[l];
    row.resize(net.layer_size(l));
    for (int i = 0; i < net.layer_size(l); ++i) {
      const Neuron& n = net.layers[l][i];
      if (n.kind == Neuron::Kind::kWeightedSum) {
        double acc = n.bias;
        for (const Term& t : n.terms) acc += t.coeff * trace.at(t.source);
        row[i] = acc;
      } else if (n.kind == Neuron::Kind::kActivation) {
        row[i] = n.fn(trace.at(n.source));
      } else {
        throw InternalError("input neuron outside layer 0");
      }
    }
  }
  return trace;
}

// --- validate ----------------------------------------------------------------

namespace {

void check_fn(const PwlFn& fn, const NeuronRef& where,
              std::vector<Violation>& out) {
  const std::size_t k = fn.slopes.size();
  if (k == 0) {
    out.push_back({where, "activation function has no pieces"});
    return;
  }
  if (fn.breakpoints.size() != k + 1 || fn.intercepts.size() != k) {
    out.push_back({where, "breakpoints/slopes/intercepts sizes disagree"});
    return;
  }
  for (std::size_t i = 0; i + 1 < fn.breakpoints.size(); ++i) {
    if (!(fn.breakpoints[i] < fn.breakpoints[i + 1])) {
      out.push_back({where, "breakpoints not sorted strictly increasing"});
      return;
    }
  }
  for (std::size_t i = 1; i + 1 < fn.breakpoints.size(); ++i) {
    const double s = fn.breakpoints[i];
    if (!std::isfinite(s)) {
      out.push_back({where, "interior breakpoint is not finite"});
      return;
    }
    const double left = fn.slopes[i - 1] * s + fn.intercepts[i - 1];
    const double right = fn.slopes[i] * s + fn.intercepts[i];
    if (std::abs(left - right) > kContinuityTol) {
      out.push_back({where, "discontinuity at breakpoint " +
                                std::to_string(s) + " (gap " +
                                std::to_string(std::abs(left - right)) + ")"});
    }
  }
}

}  // namespace

std::vector<Violation> validate(const Network& net) {
  std::vector<Violation> out;
  if (net.layer_count() < 2) {
    out.push_back({{0, 0}, "network needs an input and an output layer"});
    return out;
  }
  for (int l = 0; l < net.layer_count(); ++l) {
    if (net.layers[l].empty())
      out.push_back({{l, 0}, "empty layer"});
    for (int i = 0; i < net.layer_size(l); ++i) {
      const Neuron& n = net.layers[l][i];
      const NeuronRef here{l, i};
      if (l == 0 && n.kind != Neuron::Kind::kInput)
        out.push_back({here, "layer 0 must contain only input neurons"});
      if (l > 0 && n.kind == Neuron::Kind::kInput)
        out.push_back({here, "input neuron outside layer 0"});
      if (l == net.layer_count() - 1 && n.kind != Neuron::Kind::kWeightedSum)
        out.push_back({here, "output layer must contain only weighted sums"});
      if (n.kind == Neuron::Kind::kWeightedSum) {
        for (const Term& t : n.terms) {
          if (!net.contains(t.source))
            out.push_back({here, "dangling reference " + to_string(t.source)});
          else if (t.source.layer >= l)
            out.push_back({here, "forward reference to " +
                                     to_string(t.source)});
        }
      } else if (n.kind == Neuron::Kind::kActivation) {
        if (!net.contains(n.source))
          out.push_back({here, "dangling reference " + to_string(n.source)});
        else if (n.source.layer >= l)
          out.push_back({here, "forward reference to " + to_string(n.source)});
        check_fn(n.fn, here, out);
      }
    }
  }
  return out;
}

// --- surgery -----------------------------------------------------------------

std::vector<NeuronRef> consumers_of(const Network& net, const NeuronRef& ref) {
  std::vector<NeuronRef> out;
  for (int l = ref.layer + 1; l < net.layer_count(); ++l) {
    for (int i = 0; i < net.layer_size(l); ++i) {
      const Neuron& n = net.layers[l][i];
      if (n.kind == Neuron::Kind::kWeightedSum) {
        for (const Term& t : n.terms)
          if (t.source == ref) {
            out.push_back({l, i});
            break;
          }
      } else if (n.kind == Neuron::Kind::kActivation && n.source == ref) {
        out.push_back({l, i});
      }
    }
  }
  return out;
}

namespace {

void add_term(std::vector<Term>& terms, const NeuronRef& source, double coeff) {
  for (Term& t : terms) {
    if (t.source == source) {
      t.coeff += coeff;
      return;
    }
  }
  terms.push_back({source, coeff});
}

NeuronRef remap_after_removal(const NeuronRef& ref, const NeuronRef& removed,
                              bool layer_dropped) {
  NeuronRef out = ref;
  if (ref.layer == removed.layer && ref.index > removed.index) --out.index;
  if (layer_dropped && ref.layer > removed.layer) --out.layer;
  return out;
}

void note_surgery(Network& net, const std::string& line) {
  auto& log = net.metadata["surgery"];
  if (!log.empty()) log += "; ";
  log += line;
}

}  // namespace

Network eliminate_ws_neuron(const Network& net, const NeuronRef& v) {
  const Neuron victim = net.at(v);
  if (victim.kind != Neuron::Kind::kWeightedSum)
    throw InputError("eliminate_ws_neuron: " + to_string(v) +
                     " is not a weighted sum");
  if (v.layer == 0 || v.layer == net.layer_count() - 1)
    throw InputError(
        "eliminate_ws_neuron: refusing to remove from the input or output "
        "layer");
  for (const NeuronRef& c : consumers_of(net, v)) {
    if (net.at(c).kind != Neuron::Kind::kWeightedSum)
      throw InputError("eliminate_ws_neuron: " + to_string(v) +
                       " feeds activation neuron " + to_string(c));
  }

  Network out = net;
  // Fold v's sum into every consumer, merging duplicate sources.
  for (int l = v.layer + 1; l < out.layer_count(); ++l) {
    for (Neuron& n : out.layers[l]) {
      if (n.kind != Neuron::Kind::kWeightedSum) continue;
      double c = 0.0;
      bool found = false;
      std::vector<Term> kept;
      kept.reserve(n.terms.size());
      for (const Term& t : n.terms) {
        if (t.source == v) {
          c += t.coeff;
          found = true;
        } else {
          kept.push_back(t);
        }
      }
      if (!found) continue;
      n.terms = std::move(kept);
      n.bias += c * victim.bias;
      for (const Term& t : victim.terms)
        add_term(n.terms, t.source, c * t.coeff);
    }
  }

  // Physically delete v, then re-index every reference.
  out.layers[v.layer].erase(out.layers[v.layer].begin() + v.index);
  const bool layer_dropped = out.layers[v.layer].empty();
  if (layer_dropped) out.layers.erase(out.layers.begin() + v.layer);
  for (auto& layer : out.layers) {
    for (Neuron& n : layer) {
      if (n.kind == Neuron::Kind::kWeightedSum) {
        for (Term& t : n.terms)
          t.source = remap_after_removal(t.source, v, layer_dropped);
      } else if (n.kind == Neuron::Kind::kActivation) {
        n.source = remap_after_removal(n.source, v, layer_dropped);
      }
    }
  }
  note_surgery(out, "removed " + to_string(v) +
                        (layer_dropped ? " (layer dropped)" : ""));
  return out;
}

Network replace_activation(const Network& net, const NeuronRef& v, double a,
                           double b) {
  const Neuron& old = net.at(v);
  if (old.kind != Neuron::Kind::kActivation)
    throw InputError("replace_activation: " + to_string(v) +
                     " is not an activation neuron");
  Network out = net;
  Neuron& n = out.at(v);
  const NeuronRef source = n.source;
  const std::int64_t id = n.id;
  n = Neuron::weighted_sum(b, {{source, a}});
  n.id = id;
  return out;
}

namespace {

bool eligible_for_elimination(const Network& net, const NeuronRef& ref) {
  const Neuron& n = net.at(ref);
  if (n.kind != Neuron::Kind::kWeightedSum) return false;
  if (ref.layer == 0 || ref.layer == net.layer_count() - 1) return false;
  for (const NeuronRef& c : consumers_of(net, ref))
    if (net.at(c).kind != Neuron::Kind::kWeightedSum) return false;
  return true;
}

// Splits any layer holding both weighted sums and activations into two
// consecutive homogeneous layers (weighted sums first). References never
// point within a layer, so the split is function-preserving.
Network split_mixed_layers(const Network& net) {
  Network out = net;
  for (int l = 1; l < out.layer_count(); ++l) {
    bool has_ws = false, has_act = false;
    for (const Neuron& n : out.layers[l]) {
      has_ws |= n.kind == Neuron::Kind::kWeightedSum;
      has_act |= n.kind == Neuron::Kind::kActivation;
    }
    if (!(has_ws && has_act)) continue;

    std::vector<Neuron> ws, act;
    std::vector<NeuronRef> new_home(out.layer_size(l));
    for (int i = 0; i < out.layer_size(l); ++i) {
      Neuron& n = out.layers[l][i];
      if (n.kind == Neuron::Kind::kWeightedSum) {
        new_home[i] = {l, static_cast<int>(ws.size())};
        ws.push_back(std::move(n));
      } else {
        new_home[i] = {l + 1, static_cast<int>(act.size())};
        act.push_back(std::move(n));
      }
    }
    out.layers[l] = std::move(ws);
    out.layers.insert(out.layers.begin() + l + 1, std::move(act));
    const int old_layer = l;
    auto remap = [&](NeuronRef ref) -> NeuronRef {
      if (ref.layer == old_layer) return new_home[ref.index];
      if (ref.layer > old_layer) return {ref.layer + 1, ref.index};
      return ref;
    };
    for (auto& layer : out.layers) {
      for (Neuron& n : layer) {
        if (n.kind == Neuron::Kind::kWeightedSum) {
          for (Term& t : n.terms) t.source = remap(t.source);
        } else if (n.kind == Neuron::Kind::kActivation) {
          n.source = remap(n.source);
        }
      }
    }
    note_surgery(out, "split mixed layer L" + std::to_string(old_layer));
  }
  return out;
}

}  // namespace

Network saturate_ws_elimination(const Network& net) {
  Network out = net;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int l = 1; !changed && l + 1 < out.layer_count(); ++l) {
      for (int i = 0; !changed && i < out.layer_size(l); ++i) {
        const NeuronRef ref{l, i};
        if (eligible_for_elimination(out, ref)) {
          out = eliminate_ws_neuron(out, ref);
          changed = true;
        }
      }
    }
  }
  return split_mixed_layers(out);
}

std::optional<AffineMap> to_affine(const Network& net) {
  Network flat = saturate_ws_elimination(net);
  for (const auto& layer : flat.layers)
    for (const Neuron& n : layer)
      if (n.kind == Neuron::Kind::kActivation) return std::nullopt;
  if (flat.layer_count() != 2)
    throw InternalError("saturation left hidden weighted sums behind");
  AffineMap map;
  map.matrix.assign(flat.output_dim(),
                    std::vector<double>(flat.input_dim(), 0.0));
  map.offset.assign(flat.output_dim(), 0.0);
  for (int i = 0; i < flat.output_dim(); ++i) {
    const Neuron& n = flat.layers[1][i];
    map.offset[i] = n.bias;
    for (const Term& t : n.terms) {
      if (t.source.layer != 0)
        throw InternalError("affine collapse left a non-input reference");
      map.matrix[i][t.source.index] += t.coeff;
    }
  }
  return map;
}

std::vector<double> AffineMap::apply(const std::vector<double>& x) const {
  if (static_cast<int>(x.size()) != input_dim())
    throw InputError("affine map: dimension mismatch");
  std::vector<double> y(offset);
  for (int i = 0; i < output_dim(); ++i)
    for (int j = 0; j < input_dim(); ++j) y[i] += matrix[i][j] * x[j];
  return y;
}

}  // namespace nnshrink
