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

#ifndef NNSHRINK_JSON_IO_HPP_
#define NNSHRINK_JSON_IO_HPP_

#include <string>

#include "json.hpp"
#include "nnshrink/bounds.hpp"
#include "nnshrink/network.hpp"

namespace nnshrink {

// Schema violation; `path` points at the offending JSON node ("$.layers[2]").
struct ParseError : InputError {
  std::string path;
  ParseError(std::string at, const std::string& what)
      : InputError("parse error at " + at + ": " + what), path(std::move(at)) {}
};

Network parse_network(const std::string& text);
Network network_from_json(const nlohmann::json& j);
nlohmann::json network_to_json(const Network& net);
std::string serialize_network(const Network& net);

Box box_from_json(const nlohmann::json& j);
nlohmann::json box_to_json(const Box& box);

nlohmann::json bounds_to_json(const BoundsMap& bounds);
BoundsMap bounds_from_json(const nlohmann::json& j);

nlohmann::json affine_to_json(const AffineMap& map);
AffineMap affine_from_json(const nlohmann::json& j);

// File helpers used by the CLI and the family store.
nlohmann::json load_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace nnshrink

#endif  // NNSHRINK_JSON_IO_HPP_
