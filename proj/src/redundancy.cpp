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

#include "nnshrink/redundancy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "nnshrink/rng.hpp"

namespace nnshrink {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kCertSlack = 1e-12;
}

Replacement Replacement::zero(NeuronRef v, double epsilon) {
  return {v, Mode::kZero, 0.0, 0.0, epsilon};
}

Replacement Replacement::identity(NeuronRef v, double epsilon) {
  return {v, Mode::kIdentity, 1.0, 0.0, epsilon};
}

Replacement Replacement::line(NeuronRef v, double a, double b,
                              double epsilon) {
  return {v, Mode::kLine, a, b, epsilon};
}

double Replacement::slope() const {
  return mode == Mode::kZero ? 0.0 : (mode == Mode::kIdentity ? 1.0 : a);
}

double Replacement::intercept() const {
  return mode == Mode::kLine ? b : 0.0;
}

double ErrorLedger::headline() const {
  double worst = 0.0;
  for (const auto& [lo, hi] : output_bounds)
    worst = std::max(worst, std::max(lo, hi));
  return worst;
}

std::string to_string(RedundancyKind kind) {
  switch (kind) {
    case RedundancyKind::kPhaseRedundant: return "phase_redundant";
    case RedundancyKind::kForwardRedundant: return "forward_redundant";
    case RedundancyKind::kResultPreserving: return "result_preserving";
    case RedundancyKind::kRelaxedRedundant: return "relaxed_redundant";
  }
  return "?";
}

std::optional<int> classify_phase_by_bounds(const Network& net,
                                            const BoundsMap& bounds,
                                            const NeuronRef& v) {
  const Neuron& n = net.at(v);
  if (n.kind != Neuron::Kind::kActivation)
    throw InputError("classify_phase_by_bounds: " + to_string(v) +
                     " is not an activation");
  const Interval& src = bounds.at(n.source);
  return n.fn.segment_containing(src.lo, src.hi);
}

// --- simulation filter ---------------------------------------------------------

namespace {

// Re-evaluates layers from `start` onward on top of a base trace, with
// neuron `v` forced to compute line a*x+b. Cheap twin evaluation: the
// prefix is shared by construction.
std::vector<double> replay_with_line(const Network& net, const LayerTrace& base,
                                     const NeuronRef& v, double a, double b,
                                     int upto_layer,
                                     std::vector<std::vector<double>>& scratch) {
  scratch = base.values;
  for (int l = v.layer; l <= upto_layer; ++l) {
    for (int i = 0; i < net.layer_size(l); ++i) {
      const Neuron& n = net.layers[l][i];
      double value;
      if (l == v.layer && i == v.index) {
        value = a * scratch[n.source.layer][n.source.index] + b;
      } else if (n.kind == Neuron::Kind::kWeightedSum) {
        value = n.bias;
        for (const Term& t : n.terms)
          value += t.coeff * scratch[t.source.layer][t.source.index];
      } else if (n.kind == Neuron::Kind::kActivation) {
        value = n.fn(scratch[n.source.layer][n.source.index]);
      } else {
        value = scratch[l][i];
      }
      scratch[l][i] = value;
    }
  }
  return scratch[upto_layer];
}

int target_layer_for(const Network& net, const Candidate& c) {
  int count = 0;
  for (int l = c.neuron.layer + 1; l < net.layer_count(); ++l) {
    bool has_ws = false;
    for (const Neuron& n : net.layers[l])
      if (n.kind == Neuron::Kind::kWeightedSum) has_ws = true;
    if (has_ws && ++count == c.k) return l;
  }
  throw InputError("simulate_filter: forward candidate k out of range");
}

int argmax_lowest(const std::vector<double>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace

SimulationResult simulate_filter(const Network& net, const Box& box,
                                 const std::vector<Candidate>& candidates,
                                 std::int64_t samples, std::uint64_t seed) {
  if (samples < 1) throw InputError("simulate_filter: need at least 1 sample");
  if (box.dim() != net.input_dim())
    throw InputError("simulate_filter: box/network dimension mismatch");

  const std::size_t count = candidates.size();
  std::vector<bool> alive(count, true);
  std::vector<int> seen_segment(count, -1);
  std::vector<std::vector<double>> first_input(count);
  std::vector<int> targets(count, -1);
  SimulationResult result;
  result.dropped.reserve(count);
  for (std::size_t c = 0; c < count; ++c) {
    if (candidates[c].kind == Candidate::Kind::kForward)
      targets[c] = target_layer_for(net, candidates[c]);
    else if (candidates[c].kind == Candidate::Kind::kResultPreserving)
      targets[c] = net.layer_count() - 1;
  }

  Rng rng(seed);
  std::vector<std::vector<double>> scratch;
  std::size_t remaining = count;
  for (std::int64_t s = 0; s < samples && remaining > 0; ++s) {
    const std::vector<double> x = rng.in_box(box);
    const LayerTrace trace = evaluate(net, x);
    for (std::size_t c = 0; c < count; ++c) {
      if (!alive[c]) continue;
      const Candidate& cand = candidates[c];
      bool refuted = false;
      int witness_segment = -1;
      if (cand.kind == Candidate::Kind::kPhase) {
        const Neuron& n = net.at(cand.neuron);
        const int seg = n.fn.segment_of(trace.at(n.source));
        if (seen_segment[c] < 0) {
          seen_segment[c] = seg;
          first_input[c] = x;
        } else if (seen_segment[c] != seg) {
          refuted = true;
          witness_segment = seg;
        }
      } else {
        const auto twin_values = replay_with_line(
            net, trace, cand.neuron, cand.a, cand.b, targets[c], scratch);
        const auto& orig_values = trace.values[targets[c]];
        if (cand.kind == Candidate::Kind::kForward) {
          for (std::size_t i = 0; i < orig_values.size() && !refuted; ++i)
            if (std::abs(orig_values[i] - twin_values[i]) > cand.tau)
              refuted = true;
        } else {
          const int w = argmax_lowest(orig_values);
          double runner = -kInf;
          for (std::size_t i = 0; i < orig_values.size(); ++i)
            if (static_cast<int>(i) != w)
              runner = std::max(runner, orig_values[i]);
          if (orig_values[w] - runner > cand.delta &&
              argmax_lowest(twin_values) != w)
            refuted = true;
        }
      }
      if (refuted) {
        alive[c] = false;
        --remaining;
        DroppedCandidate drop;
        drop.candidate = cand;
        drop.witness = x;
        if (cand.kind == Candidate::Kind::kPhase) {
          drop.earlier_input = first_input[c];
          drop.earlier_segment = seen_segment[c];
          drop.witness_segment = witness_segment;
        }
        result.dropped.push_back(std::move(drop));
      }
    }
  }
  for (std::size_t c = 0; c < count; ++c) {
    if (!alive[c]) continue;
    result.survivors.push_back(candidates[c]);
    result.phase_segment.push_back(
        candidates[c].kind == Candidate::Kind::kPhase ? seen_segment[c] : -1);
  }
  return result;
}

// --- relaxed redundancy -----------------------------------------------------------

MinimalErrorLine minimal_error_line(double lb, double ub) {
  if (!(lb < 0.0) || !(ub > 0.0))
    throw InputError(
        "minimal_error_line: needs lb < 0 < ub (otherwise the neuron is "
        "phase-redundant)");
  MinimalErrorLine line;
  line.a = ub / (ub - lb);
  line.b = -lb * ub / (2.0 * (ub - lb));
  line.e_max = line.b;
  return line;
}

double max_line_error(const PwlFn& fn, double a, double b, double lo,
                      double hi) {
  double worst = std::max(std::abs(fn(lo) - (a * lo + b)),
                          std::abs(fn(hi) - (a * hi + b)));
  for (std::size_t i = 1; i + 1 < fn.breakpoints.size(); ++i) {
    const double s = fn.breakpoints[i];
    if (s > lo && s < hi)
      worst = std::max(worst, std::abs(fn(s) - (a * s + b)));
  }
  return worst;
}

MinimalErrorLine chebyshev_line(const PwlFn& fn, double lb, double ub) {
  if (!(lb < ub)) throw InputError("chebyshev_line: empty interval");
  if (fn.is_relu() && lb < 0.0 && ub > 0.0) {
    return minimal_error_line(lb, ub);  // closed form
  }
  std::vector<double> xs{lb, ub};
  for (std::size_t i = 1; i + 1 < fn.breakpoints.size(); ++i)
    if (fn.breakpoints[i] > lb && fn.breakpoints[i] < ub)
      xs.push_back(fn.breakpoints[i]);
  std::sort(xs.begin(), xs.end());

  MinimalErrorLine best;
  best.e_max = kInf;
  auto consider = [&](double a, double b) {
    const double e = max_line_error(fn, a, b, lb, ub);
    if (e < best.e_max) best = {a, b, e};
  };
  if (xs.size() == 2) {
    const double a = (fn(ub) - fn(lb)) / (ub - lb);
    consider(a, fn(lb) - a * lb);
    return best;
  }
  // The optimal line equioscillates on three of the vertex points.
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = i + 1; j < xs.size(); ++j) {
      for (std::size_t k = j + 1; k < xs.size(); ++k) {
        const double x1 = xs[i], x2 = xs[j], x3 = xs[k];
        const double f1 = fn(x1), f2 = fn(x2), f3 = fn(x3);
        const double a = (f3 - f1) / (x3 - x1);
        // Residuals alternate: r1 = r3 = e, r2 = -e (sign immaterial).
        const double e = 0.5 * (f1 - f2 - a * (x1 - x2));
        const double b = f1 - a * x1 - e;
        consider(a, b);
      }
    }
  }
  return best;
}

// --- error calculus ----------------------------------------------------------------

namespace {

void certify(const Network& net, const Replacement& r, const BoundsMap& bounds) {
  const Neuron& n = net.at(r.neuron);
  if (n.kind != Neuron::Kind::kActivation)
    throw InputError("replacement target " + to_string(r.neuron) +
                     " is not an activation");
  if (r.epsilon < 0) throw InputError("replacement epsilon must be >= 0");
  const Interval& src = bounds.at(n.source);
  std::ostringstream msg;
  switch (r.mode) {
    case Replacement::Mode::kZero:
      if (!n.fn.is_relu())
        throw InputError("Zero replacement is only certified for ReLU");
      if (src.hi > r.epsilon + kCertSlack) {
        msg << "uncertified Zero replacement of " << to_string(r.neuron)
            << ": requires ub <= epsilon but " << src.hi << " > " << r.epsilon;
        throw InputError(msg.str());
      }
      break;
    case Replacement::Mode::kIdentity:
      if (!n.fn.is_relu())
        throw InputError("Identity replacement is only certified for ReLU");
      if (src.lo < -r.epsilon - kCertSlack) {
        msg << "uncertified Identity replacement of " << to_string(r.neuron)
            << ": requires lb >= -epsilon but " << src.lo << " < "
            << -r.epsilon;
        throw InputError(msg.str());
      }
      break;
    case Replacement::Mode::kLine: {
      const double err = max_line_error(n.fn, r.a, r.b, src.lo, src.hi);
      if (err > r.epsilon + kCertSlack) {
        msg << "uncertified Line replacement of " << to_string(r.neuron)
            << ": requires max |fn - line| <= epsilon over [" << src.lo << ", "
            << src.hi << "] but " << err << " > " << r.epsilon;
        throw InputError(msg.str());
      }
      break;
    }
  }
}

}  // namespace

ErrorLedger propagate_error_bounds(const Network& net,
                                   const std::vector<Replacement>& replacements,
                                   const BoundsMap& bounds) {
  for (const Replacement& r : replacements) certify(net, r, bounds);

  auto find_replacement = [&](const NeuronRef& ref) -> const Replacement* {
    for (const Replacement& r : replacements)
      if (r.neuron == ref) return &r;
    return nullptr;
  };

  ErrorLedger ledger;
  ledger.err.resize(net.layer_count());
  ledger.err[0].assign(net.input_dim(), {0.0, 0.0});  // inputs carry no error
  for (int l = 1; l < net.layer_count(); ++l) {
    ledger.err[l].resize(net.layer_size(l));
    for (int i = 0; i < net.layer_size(l); ++i) {
      const Neuron& n = net.layers[l][i];
      if (n.kind == Neuron::Kind::kWeightedSum) {
        // A = worst drop, B = worst rise of the incoming sum.
        double a_term = 0.0, b_term = 0.0;
        for (const Term& t : n.terms) {
          const auto [lo, hi] = ledger.at(t.source);
          if (t.coeff >= 0) {
            a_term += t.coeff * lo;
            b_term += t.coeff * hi;
          } else {
            a_term += -t.coeff * hi;
            b_term += -t.coeff * lo;
          }
        }
        ledger.err[l][i] = {a_term, b_term};
      } else {
        const auto [a_in, b_in] = ledger.at(n.source);
        const Replacement* r = find_replacement({l, i});
        if (r == nullptr) {
          if (n.fn.min_slope() >= 0.0) {
            // Monotone piece-wise linear: scaling by the largest slope
            // keeps the two sides separate (ReLU passes through as-is).
            const double scale = std::max(n.fn.max_slope(), 0.0);
            ledger.err[l][i] = {scale * a_in, scale * b_in};
          } else {
            // Mixed-sign slopes can flip a drop into a rise; only the
            // symmetric Lipschitz bound is sound.
            const double worst = n.fn.max_abs_slope() * std::max(a_in, b_in);
            ledger.err[l][i] = {worst, worst};
          }
        } else {
          switch (r->mode) {
            case Replacement::Mode::kZero:
              ledger.err[l][i] = {r->epsilon, 0.0};
              break;
            case Replacement::Mode::kIdentity:
              ledger.err[l][i] = {a_in + r->epsilon, b_in};
              break;
            case Replacement::Mode::kLine: {
              const double up = std::max(r->a, 0.0);
              const double down = std::max(-r->a, 0.0);
              ledger.err[l][i] = {up * a_in + down * b_in + r->epsilon,
                                  up * b_in + down * a_in + r->epsilon};
              break;
            }
          }
        }
      }
    }
  }
  ledger.output_bounds = ledger.err.back();
  return ledger;
}

RelaxedRemoval greedy_relaxed_removal(const Network& net,
                                      const BoundsMap& bounds,
                                      double error_budget) {
  if (error_budget < 0)
    throw InputError("greedy_relaxed_removal: error budget must be >= 0");

  struct Entry {
    NeuronRef ref;
    MinimalErrorLine line;
  };
  std::vector<Entry> candidates;
  for (int l = 1; l + 1 < net.layer_count(); ++l) {
    for (int i = 0; i < net.layer_size(l); ++i) {
      const Neuron& n = net.layers[l][i];
      if (n.kind != Neuron::Kind::kActivation) continue;
      const NeuronRef ref{l, i};
      if (classify_phase_by_bounds(net, bounds, ref).has_value())
        continue;  // stable neurons belong to the exact passes
      const Interval& src = bounds.at(n.source);
      candidates.push_back({ref, chebyshev_line(n.fn, src.lo, src.hi)});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Entry& x, const Entry& y) {
                     if (x.line.e_max != y.line.e_max)
                       return x.line.e_max < y.line.e_max;
                     return x.ref < y.ref;
                   });

  RelaxedRemoval out;
  std::vector<Replacement> accepted;
  ErrorLedger ledger = propagate_error_bounds(net, accepted, bounds);
  for (const Entry& e : candidates) {
    std::vector<Replacement> trial = accepted;
    trial.push_back(
        Replacement::line(e.ref, e.line.a, e.line.b, e.line.e_max));
    ErrorLedger trial_ledger = propagate_error_bounds(net, trial, bounds);
    if (trial_ledger.headline() <= error_budget) {
      accepted = std::move(trial);
      ledger = std::move(trial_ledger);
      RedundancyVerdict verdict;
      verdict.neuron = e.ref;
      verdict.neuron_id = net.at(e.ref).id;
      verdict.kind = RedundancyKind::kRelaxedRedundant;
      verdict.a = e.line.a;
      verdict.b = e.line.b;
      verdict.epsilon = e.line.e_max;
      verdict.evidence = "ledger headline " +
                         std::to_string(trial_ledger.headline()) +
                         " <= budget " + std::to_string(error_budget);
      out.accepted.push_back(verdict);
    }
  }

  Network result = net;
  // Apply in descending ref order so earlier refs stay valid; replacement
  // does not renumber, so order is cosmetic, but deterministic.
  for (const Replacement& r : accepted)
    result = replace_activation(result, r.neuron, r.slope(), r.intercept());
  out.network = saturate_ws_elimination(result);
  out.ledger = std::move(ledger);
  return out;
}

}  // namespace nnshrink
