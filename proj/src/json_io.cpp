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

#include "nnshrink/json_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace nnshrink {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const json& require(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw ParseError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(path + "." + key, "missing key");
  return *it;
}

double number_at(const json& j, const std::string& path) {
  if (!j.is_number()) throw ParseError(path, "expected a number");
  return j.get<double>();
}

int int_at(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ParseError(path, "expected an integer");
  return j.get<int>();
}

// Breakpoints additionally admit the strings "inf" / "-inf".
double breakpoint_at(const json& j, const std::string& path) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
    throw ParseError(path, "expected a number or \"inf\"/\"-inf\"");
  }
  return number_at(j, path);
}

NeuronRef ref_at(const json& j, const std::string& path) {
  NeuronRef ref;
  ref.layer = int_at(require(j, "layer", path), path + ".layer");
  ref.index = int_at(require(j, "index", path), path + ".index");
  return ref;
}

PwlFn fn_at(const json& j, const std::string& path) {
  if (j.is_string()) {
    if (j.get<std::string>() == "relu") return PwlFn::relu();
    throw ParseError(path, "unknown activation name \"" +
                               j.get<std::string>() + "\"");
  }
  PwlFn fn;
  const json& bp = require(j, "breakpoints", path);
  const json& sl = require(j, "slopes", path);
  const json& ic = require(j, "intercepts", path);
  if (!bp.is_array() || !sl.is_array() || !ic.is_array())
    throw ParseError(path, "breakpoints/slopes/intercepts must be arrays");
  for (std::size_t i = 0; i < bp.size(); ++i)
    fn.breakpoints.push_back(
        breakpoint_at(bp[i], path + ".breakpoints[" + std::to_string(i) + "]"));
  for (std::size_t i = 0; i < sl.size(); ++i)
    fn.slopes.push_back(
        number_at(sl[i], path + ".slopes[" + std::to_string(i) + "]"));
  for (std::size_t i = 0; i < ic.size(); ++i)
    fn.intercepts.push_back(
        number_at(ic[i], path + ".intercepts[" + std::to_string(i) + "]"));
  if (fn.breakpoints.size() != fn.slopes.size() + 1 ||
      fn.slopes.size() != fn.intercepts.size() || fn.slopes.empty())
    throw ParseError(path, "breakpoints/slopes/intercepts sizes disagree");
  return fn;
}

json fn_to_json(const PwlFn& fn) {
  if (fn.is_relu()) return json("relu");
  json out;
  json bp = json::array();
  for (double s : fn.breakpoints) {
    if (s == kInf)
      bp.push_back("inf");
    else if (s == -kInf)
      bp.push_back("-inf");
    else
      bp.push_back(s);
  }
  out["breakpoints"] = std::move(bp);
  out["slopes"] = fn.slopes;
  out["intercepts"] = fn.intercepts;
  return out;
}

}  // namespace

Network network_from_json(const json& j) {
  Network net;
  if (!j.is_object()) throw ParseError("$", "expected a JSON object");
  if (auto it = j.find("name"); it != j.end()) {
    if (!it->is_string()) throw ParseError("$.name", "expected a string");
    net.name = it->get<std::string>();
  }
  const json& layers = require(j, "layers", "$");
  if (!layers.is_array() || layers.empty())
    throw ParseError("$.layers", "expected a non-empty array");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string lpath = "$.layers[" + std::to_string(l) + "]";
    const json& jl = layers[l];
    const json& kind = require(jl, "kind", lpath);
    if (!kind.is_string()) throw ParseError(lpath + ".kind", "expected a string");
    const std::string k = kind.get<std::string>();
    std::vector<Neuron> layer;
    if (k == "input") {
      const int size = int_at(require(jl, "size", lpath), lpath + ".size");
      if (size <= 0) throw ParseError(lpath + ".size", "must be positive");
      layer.assign(size, Neuron::input());
    } else if (k == "weighted_sum") {
      const json& neurons = require(jl, "neurons", lpath);
      if (!neurons.is_array())
        throw ParseError(lpath + ".neurons", "expected an array");
      for (std::size_t i = 0; i < neurons.size(); ++i) {
        const std::string npath =
            lpath + ".neurons[" + std::to_string(i) + "]";
        const json& jn = neurons[i];
        Neuron n = Neuron::weighted_sum(
            number_at(require(jn, "bias", npath), npath + ".bias"), {});
        const json& terms = require(jn, "terms", npath);
        if (!terms.is_array())
          throw ParseError(npath + ".terms", "expected an array");
        for (std::size_t t = 0; t < terms.size(); ++t) {
          const std::string tpath = npath + ".terms[" + std::to_string(t) + "]";
          Term term;
          term.source = ref_at(terms[t], tpath);
          term.coeff =
              number_at(require(terms[t], "coeff", tpath), tpath + ".coeff");
          n.terms.push_back(term);
        }
        layer.push_back(std::move(n));
      }
    } else if (k == "activation") {
      const json& neurons = require(jl, "neurons", lpath);
      if (!neurons.is_array())
        throw ParseError(lpath + ".neurons", "expected an array");
      for (std::size_t i = 0; i < neurons.size(); ++i) {
        const std::string npath =
            lpath + ".neurons[" + std::to_string(i) + "]";
        const json& jn = neurons[i];
        layer.push_back(Neuron::activation(
            ref_at(require(jn, "source", npath), npath + ".source"),
            fn_at(require(jn, "fn", npath), npath + ".fn")));
      }
    } else {
      throw ParseError(lpath + ".kind", "unknown layer kind \"" + k + "\"");
    }
    net.layers.push_back(std::move(layer));
  }
  net.assign_ids();
  return net;
}

Network parse_network(const std::string& text) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw ParseError("$", "invalid JSON");
  return network_from_json(j);
}

json network_to_json(const Network& net) {
  json layers = json::array();
  for (int l = 0; l < net.layer_count(); ++l) {
    const auto& layer = net.layers[l];
    if (layer.empty()) throw InputError("serialize: empty layer");
    const auto kind = layer.front().kind;
    for (const Neuron& n : layer)
      if (n.kind != kind)
        throw InputError(
            "serialize: layer " + std::to_string(l) +
            " mixes neuron kinds; run saturate_ws_elimination first");
    json jl;
    if (kind == Neuron::Kind::kInput) {
      jl["kind"] = "input";
      jl["size"] = static_cast<int>(layer.size());
    } else if (kind == Neuron::Kind::kWeightedSum) {
      jl["kind"] = "weighted_sum";
      json neurons = json::array();
      for (const Neuron& n : layer) {
        json jn;
        jn["bias"] = n.bias;
        json terms = json::array();
        for (const Term& t : n.terms) {
          terms.push_back({{"layer", t.source.layer},
                           {"index", t.source.index},
                           {"coeff", t.coeff}});
        }
        jn["terms"] = std::move(terms);
        neurons.push_back(std::move(jn));
      }
      jl["neurons"] = std::move(neurons);
    } else {
      jl["kind"] = "activation";
      json neurons = json::array();
      for (const Neuron& n : layer) {
        neurons.push_back({{"source", {{"layer", n.source.layer},
                                       {"index", n.source.index}}},
                           {"fn", fn_to_json(n.fn)}});
      }
      jl["neurons"] = std::move(neurons);
    }
    layers.push_back(std::move(jl));
  }
  json out;
  out["name"] = net.name;
  out["layers"] = std::move(layers);
  return out;
}

std::string serialize_network(const Network& net) {
  return network_to_json(net).dump(2);
}

Box box_from_json(const json& j) {
  const json& dims = require(j, "dims", "$");
  if (!dims.is_array() || dims.empty())
    throw ParseError("$.dims", "expected a non-empty array");
  Box box;
  for (std::size_t d = 0; d < dims.size(); ++d) {
    const std::string path = "$.dims[" + std::to_string(d) + "]";
    Interval iv;
    iv.lo = number_at(require(dims[d], "lo", path), path + ".lo");
    iv.hi = number_at(require(dims[d], "hi", path), path + ".hi");
    if (iv.lo > iv.hi) throw ParseError(path, "lo exceeds hi");
    box.dims.push_back(iv);
  }
  return box;
}

json box_to_json(const Box& box) {
  json dims = json::array();
  for (const Interval& iv : box.dims)
    dims.push_back({{"lo", iv.lo}, {"hi", iv.hi}});
  return json{{"dims", std::move(dims)}};
}

json bounds_to_json(const BoundsMap& bounds) {
  json items = json::array();
  for (std::size_t l = 0; l < bounds.intervals.size(); ++l) {
    for (std::size_t i = 0; i < bounds.intervals[l].size(); ++i) {
      const Interval& iv = bounds.intervals[l][i];
      items.push_back({{"layer", static_cast<int>(l)},
                       {"index", static_cast<int>(i)},
                       {"lb", iv.lo},
                       {"ub", iv.hi}});
    }
  }
  return json{{"bounds", std::move(items)}};
}

BoundsMap bounds_from_json(const json& j) {
  const json& items = require(j, "bounds", "$");
  if (!items.is_array()) throw ParseError("$.bounds", "expected an array");
  BoundsMap out;
  for (std::size_t k = 0; k < items.size(); ++k) {
    const std::string path = "$.bounds[" + std::to_string(k) + "]";
    const int layer = int_at(require(items[k], "layer", path), path + ".layer");
    const int index = int_at(require(items[k], "index", path), path + ".index");
    if (layer < 0 || index < 0) throw ParseError(path, "negative reference");
    if (static_cast<int>(out.intervals.size()) <= layer)
      out.intervals.resize(layer + 1);
    if (static_cast<int>(out.intervals[layer].size()) <= index)
      out.intervals[layer].resize(index + 1);
    out.intervals[layer][index] = {
        number_at(require(items[k], "lb", path), path + ".lb"),
        number_at(require(items[k], "ub", path), path + ".ub")};
  }
  return out;
}

json affine_to_json(const AffineMap& map) {
  return json{{"affine", {{"matrix", map.matrix}, {"offset", map.offset}}}};
}

AffineMap affine_from_json(const json& j) {
  const json& a = require(j, "affine", "$");
  AffineMap map;
  const json& matrix = require(a, "matrix", "$.affine");
  if (!matrix.is_array()) throw ParseError("$.affine.matrix", "expected array");
  for (std::size_t r = 0; r < matrix.size(); ++r) {
    const std::string path = "$.affine.matrix[" + std::to_string(r) + "]";
    if (!matrix[r].is_array()) throw ParseError(path, "expected array");
    std::vector<double> row;
    for (std::size_t c = 0; c < matrix[r].size(); ++c)
      row.push_back(number_at(matrix[r][c], path + "[" + std::to_string(c) + "]"));
    map.matrix.push_back(std::move(row));
  }
  const json& offset = require(a, "offset", "$.affine");
  if (!offset.is_array()) throw ParseError("$.affine.offset", "expected array");
  for (std::size_t i = 0; i < offset.size(); ++i)
    map.offset.push_back(
        number_at(offset[i], "$.affine.offset[" + std::to_string(i) + "]"));
  return map;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open file: " + path);
  json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw InputError("invalid JSON in file: " + path);
  return j;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace nnshrink
