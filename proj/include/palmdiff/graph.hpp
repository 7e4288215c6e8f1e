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

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace palmdiff {

// Dense vertex id, assigned layer by layer starting at 0.
using VertexId = std::int32_t;

// Unvalidated, label-based description of a candidate layered graph. This is
// what graph files deserialize into.
struct GraphSpec {
  std::vector<std::vector<std::string>> layers;
  std::vector<std::pair<std::string, std::string>> edges;
};

enum class ViolationKind {
  kTooFewLayers,
  kEmptyLayer,
  kFirstLayerNotSingleton,
  kDuplicateLabel,
  kUnknownVertex,
  kDuplicateEdge,
  kCrossLayerEdge,
  kDeadEnd,  // zero out-degree but positive in-degree before the last layer
};

std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(ViolationKind kind) const;
  std::string summary() const;
};

// Reports every violated layered-graph condition; never throws.
ValidationReport validate(const GraphSpec& spec);

// A validated layered graph. Immutable after construction.
//
// Layers are indexed from 0 here; layer 0 is the singleton source layer.
// Adjacency lists are sorted ascending by destination id, which fixes the
// meaning of PALM row entries.
class LayeredGraph {
 public:
  // Throws Error(kInvalidGraph) carrying the validation summary.
  static LayeredGraph from_spec(const GraphSpec& spec);

  int num_layers() const { return static_cast<int>(layers_.size()); }
  int num_vertices() const { return static_cast<int>(labels_.size()); }
  int num_edges() const { return num_edges_; }

  std::span<const VertexId> layer(int l) const { return layers_[l]; }
  int layer_of(VertexId v) const { return layer_of_[v]; }
  VertexId source() const { return layers_.front().front(); }

  std::span<const VertexId> out_edges(VertexId v) const { return adjacency_[v]; }
  int out_degree(VertexId v) const { return static_cast<int>(adjacency_[v].size()); }
  int in_degree(VertexId v) const { return in_degree_[v]; }
  int max_out_degree() const { return max_out_degree_; }

  // Position of `dst` within out_edges(src), if the edge exists.
  std::optional<int> edge_index(VertexId src, VertexId dst) const;

  const std::string& label(VertexId v) const { return labels_[v]; }
  std::optional<VertexId> find(std::string_view label) const;

  // Canonical label-based form (layers in id order, edges in adjacency order).
  GraphSpec to_spec() const;

 private:
  LayeredGraph() = default;

  std::vector<std::vector<VertexId>> layers_;
  std::vector<int> layer_of_;
  std::vector<std::vector<VertexId>> adjacency_;
  std::vector<int> in_degree_;
  std::vector<std::string> labels_;
  std::unordered_map<std::string, VertexId> index_;
  int num_edges_ = 0;
  int max_out_degree_ = 0;
};

// One vertex per layer. Ordering is lexicographic on vertex ids, which is the
// canonical path order used for enumeration and metric tie-breaking.
struct Path {
  std::vector<VertexId> vertices;

  auto operator<=>(const Path&) const = default;
  bool operator==(const Path&) const = default;
};

bool is_valid_path(const LayeredGraph& g, std::span<const VertexId> seq);
inline bool is_valid_path(const LayeredGraph& g, const Path& p) {
  return is_valid_path(g, p.vertices);
}

// Path from labels; throws Error(kInvalidPath) for unknown labels or when the
// sequence is not a path of g.
Path path_from_labels(const LayeredGraph& g, std::span<const std::string> labels);
std::string path_to_string(const LayeredGraph& g, const Path& p, char sep = ',');

// Number of source-to-sink paths (as a double to avoid overflow on big graphs).
double count_paths(const LayeredGraph& g);

// Number of paths from each vertex to the last layer.
std::vector<double> paths_to_sink(const LayeredGraph& g);

// All paths in lexicographic order. Throws Error(kCapExceeded) once more than
// `cap` paths have been produced.
std::vector<Path> enumerate_paths(const LayeredGraph& g, std::size_t cap = 1'000'000);

// Every vertex of layer l connected to every vertex of layer l+1. Labels are
// "l<layer>v<index>" with 1-based layers and 0-based indices.
LayeredGraph layerwise_full(std::span<const int> widths);

// Fully connected graph with floor(prune_fraction * |E|) uniformly chosen
// edges removed, then repaired by deleting dead-end vertices to a fixpoint.
// Resamples with derived seeds (up to 64 attempts) when the source is lost.
LayeredGraph synth_pruned(std::span<const int> widths, double prune_fraction,
                          std::uint64_t seed);

}  // namespace palmdiff
