// Copyright 2026 The palmdiff Authors
//
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

// Shared graphs and helpers for the unit tests.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "palmdiff/graph.hpp"
#include "palmdiff/palm.hpp"

namespace palmdiff::testing {

// Ten-vertex example: A -> {B, C, D}; B -> {E, F}; C -> {E, G}; D -> {F, G};
// E -> {H, I}; F -> {I}; G -> {H, J}. Ten source-to-sink paths.
inline GraphSpec fig1_spec() {
  GraphSpec s;
  s.layers = {{"A"}, {"B", "C", "D"}, {"E", "F", "G"}, {"H", "I", "J"}};
  s.edges = {{"A", "B"}, {"A", "C"}, {"A", "D"}, {"B", "E"}, {"B", "F"},
             {"C", "E"}, {"C", "G"}, {"D", "F"}, {"D", "G"}, {"E", "H"},
             {"E", "I"}, {"F", "I"}, {"G", "H"}, {"G", "J"}};
  return s;
}

inline const LayeredGraph& fig1() {
  static const LayeredGraph g = LayeredGraph::from_spec(fig1_spec());
  return g;
}

inline std::shared_ptr<const LayeredGraph> fig1_ptr() {
  static const auto g = std::make_shared<const LayeredGraph>(fig1());
  return g;
}

inline VertexId id(const LayeredGraph& g, const std::string& label) { return *g.find(label); }

inline Path path_of(const LayeredGraph& g, std::vector<std::string> labels) {
  return path_from_labels(g, labels);
}

// Toy-scale graph: eleven layers, one source and ten layers of four.
inline std::vector<int> toy_widths() {
  std::vector<int> w(11, 4);
  w[0] = 1;
  return w;
}

}  // namespace palmdiff::testing
