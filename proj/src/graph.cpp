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

#include "palmdiff/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "palmdiff/error.hpp"
#include "palmdiff/rng.hpp"

namespace palmdiff {

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kTooFewLayers: return "too-few-layers";
    case ViolationKind::kEmptyLayer: return "empty-layer";
    case ViolationKind::kFirstLayerNotSingleton: return "first-layer-not-singleton";
    case ViolationKind::kDuplicateLabel: return "duplicate-label";
    case ViolationKind::kUnknownVertex: return "unknown-vertex";
    case ViolationKind::kDuplicateEdge: return "duplicate-edge";
    case ViolationKind::kCrossLayerEdge: return "cross-layer-edge";
    case ViolationKind::kDeadEnd: return "dead-end-vertex";
  }
  return "unknown";
}

bool ValidationReport::has(ViolationKind kind) const {
  return std::any_of(violations.begin(), violations.end(),
                     [kind](const Violation& v) { return v.kind == kind; });
}

std::string ValidationReport::summary() const {
  if (ok()) return "pass";
  std::ostringstream os;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) os << "; ";
    os << to_string(violations[i].kind) << " (" << violations[i].detail << ")";
  }
  return os.str();
}

ValidationReport validate(const GraphSpec& spec) {
  ValidationReport report;
  auto add = [&](ViolationKind k, std::string detail) {
    report.violations.push_back({k, std::move(detail)});
  };

  const int num_layers = static_cast<int>(spec.layers.size());
  if (num_layers < 2) {
    add(ViolationKind::kTooFewLayers, "found " + std::to_string(num_layers) + " layer(s), need at least 2");
  }
  for (int l = 0; l < num_layers; ++l) {
    if (spec.layers[l].empty()) add(ViolationKind::kEmptyLayer, "layer " + std::to_string(l + 1));
  }
  if (num_layers > 0 && spec.layers[0].size() > 1) {
    add(ViolationKind::kFirstLayerNotSingleton,
        "first layer has " + std::to_string(spec.layers[0].size()) + " vertices");
  }

  std::unordered_map<std::string, int> layer_of;
  for (int l = 0; l < num_layers; ++l) {
    for (const auto& label : spec.layers[l]) {
      if (!layer_of.emplace(label, l).second) add(ViolationKind::kDuplicateLabel, label);
    }
  }

  std::unordered_map<std::string, int> out_deg, in_deg;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& [src, dst] : spec.edges) {
    auto s = layer_of.find(src);
    auto d = layer_of.find(dst);
    if (s == layer_of.end() || d == layer_of.end()) {
      add(ViolationKind::kUnknownVertex, src + "->" + dst);
      continue;
    }
    if (!seen.emplace(src, dst).second) {
      add(ViolationKind::kDuplicateEdge, src + "->" + dst);
      continue;
    }
    if (d->second != s->second + 1) {
      add(ViolationKind::kCrossLayerEdge,
          src + "->" + dst + " joins layer " + std::to_string(s->second + 1) + " to layer " +
              std::to_string(d->second + 1));
    }
    ++out_deg[src];
    ++in_deg[dst];
  }

  for (int l = 0; l + 1 < num_layers; ++l) {
    for (const auto& label : spec.layers[l]) {
      if (out_deg[label] == 0 && in_deg[label] > 0) {
        add(ViolationKind::kDeadEnd, label + " in layer " + std::to_string(l + 1));
      }
    }
  }
  return report;
}

LayeredGraph LayeredGraph::from_spec(const GraphSpec& spec) {
  const ValidationReport report = validate(spec);
  if (!report.ok()) throw Error(ErrorCode::kInvalidGraph, report.summary());

  LayeredGraph g;
  for (int l = 0; l < static_cast<int>(spec.layers.size()); ++l) {
    std::vector<VertexId> ids;
    for (const auto& label : spec.layers[l]) {
      const auto id = static_cast<VertexId>(g.labels_.size());
      g.labels_.push_back(label);
      g.layer_of_.push_back(l);
      g.index_.emplace(label, id);
      ids.push_back(id);
    }
    g.layers_.push_back(std::move(ids));
  }
  g.adjacency_.assign(g.labels_.size(), {});
  g.in_degree_.assign(g.labels_.size(), 0);
  for (const auto& [src, dst] : spec.edges) {
    const VertexId s = g.index_.at(src);
    const VertexId d = g.index_.at(dst);
    g.adjacency_[s].push_back(d);
    ++g.in_degree_[d];
  }
  for (auto& adj : g.adjacency_) {
    std::sort(adj.begin(), adj.end());
    g.num_edges_ += static_cast<int>(adj.size());
    g.max_out_degree_ = std::max(g.max_out_degree_, static_cast<int>(adj.size()));
  }
  return g;
}

std::optional<int> LayeredGraph::edge_index(VertexId src, VertexId dst) const {
  if (src < 0 || src >= num_vertices()) return std::nullopt;
  const auto& adj = adjacency_[src];
  auto it = std::lower_bound(adj.begin(), adj.end(), dst);
  if (it == adj.end() || *it != dst) return std::nullopt;
  return static_cast<int>(it - adj.begin());
}

std::optional<VertexId> LayeredGraph::find(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

GraphSpec LayeredGraph::to_spec() const {
  GraphSpec spec;
  for (const auto& layer : layers_) {
    std::vector<std::string> names;
    for (VertexId v : layer) names.push_back(labels_[v]);
    spec.layers.push_back(std::move(names));
  }
  for (VertexId v = 0; v < num_vertices(); ++v) {
    for (VertexId u : adjacency_[v]) spec.edges.emplace_back(labels_[v], labels_[u]);
  }
  return spec;
}

bool is_valid_path(const LayeredGraph& g, std::span<const VertexId> seq) {
  if (static_cast<int>(seq.size()) != g.num_layers()) return false;
  for (int l = 0; l < g.num_layers(); ++l) {
    const VertexId v = seq[l];
    if (v < 0 || v >= g.num_vertices() || g.layer_of(v) != l) return false;
    if (l + 1 < g.num_layers() && !g.edge_index(v, seq[l + 1])) return false;
  }
  return true;
}

Path path_from_labels(const LayeredGraph& g, std::span<const std::string> labels) {
  Path p;
  p.vertices.reserve(labels.size());
  for (const auto& label : labels) {
    auto id = g.find(label);
    if (!id) throw Error(ErrorCode::kInvalidPath, "unknown vertex '" + label + "'");
    p.vertices.push_back(*id);
  }
  if (!is_valid_path(g, p)) {
    std::string joined;
    for (const auto& label : labels) joined += (joined.empty() ? "" : ",") + label;
    throw Error(ErrorCode::kInvalidPath, "'" + joined + "' is not a path");
  }
  return p;
}

std::string path_to_string(const LayeredGraph& g, const Path& p, char sep) {
  std::string out;
  for (std::size_t i = 0; i < p.vertices.size(); ++i) {
    if (i) out += sep;
    out += g.label(p.vertices[i]);
  }
  return out;
}

std::vector<double> paths_to_sink(const LayeredGraph& g) {
  std::vector<double> count(g.num_vertices(), 0.0);
  const int last = g.num_layers() - 1;
  for (VertexId v : g.layer(last)) count[v] = 1.0;
  // Ids increase layer by layer, so a reverse sweep is a reverse topological order.
  for (VertexId v = g.num_vertices() - 1; v >= 0; --v) {
    if (g.layer_of(v) == last) continue;
    double c = 0.0;
    for (VertexId u : g.out_edges(v)) c += count[u];
    count[v] = c;
  }
  return count;
}

double count_paths(const LayeredGraph& g) { return paths_to_sink(g)[g.source()]; }

std::vector<Path> enumerate_paths(const LayeredGraph& g, std::size_t cap) {
  std::vector<Path> out;
  const int num_layers = g.num_layers();
  std::vector<VertexId> stack{g.source()};
  std::vector<int> next_edge{0};
  while (!stack.empty()) {
    const int depth = static_cast<int>(stack.size());
    if (depth == num_layers) {
      if (out.size() == cap) {
        throw Error(ErrorCode::kCapExceeded,
                    "more than " + std::to_string(cap) + " paths (aborted at " +
                        std::to_string(out.size()) + ")");
      }
      out.push_back(Path{stack});
      stack.pop_back();
      next_edge.pop_back();
      continue;
    }
    const auto adj = g.out_edges(stack.back());
    int& k = next_edge.back();
    if (k < static_cast<int>(adj.size())) {
      stack.push_back(adj[k++]);
      next_edge.push_back(0);
    } else {
      stack.pop_back();
      next_edge.pop_back();
    }
  }
  return out;
}

namespace {

std::string synth_label(int layer, int index) {
  return "l" + std::to_string(layer + 1) + "v" + std::to_string(index);
}

}  // namespace

LayeredGraph layerwise_full(std::span<const int> widths) {
  GraphSpec spec;
  for (int l = 0; l < static_cast<int>(widths.size()); ++l) {
    std::vector<std::string> layer;
    for (int i = 0; i < widths[l]; ++i) layer.push_back(synth_label(l, i));
    spec.layers.push_back(std::move(layer));
  }
  for (int l = 0; l + 1 < static_cast<int>(widths.size()); ++l) {
    for (const auto& a : spec.layers[l]) {
      for (const auto& b : spec.layers[l + 1]) spec.edges.emplace_back(a, b);
    }
  }
  return LayeredGraph::from_spec(spec);
}

LayeredGraph synth_pruned(std::span<const int> widths, double prune_fraction, std::uint64_t seed) {
  if (widths.size() < 2 || widths[0] != 1 ||
      std::any_of(widths.begin(), widths.end(), [](int w) { return w < 1; })) {
    throw Error(ErrorCode::kInvalidGraph, "widths must start with 1 and be positive, at least 2 layers");
  }
  if (!(prune_fraction >= 0.0 && prune_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidGraph, "prune fraction must lie in [0, 1)");
  }

  const int num_layers = static_cast<int>(widths.size());
  std::vector<int> first_id(num_layers + 1, 0);
  for (int l = 0; l < num_layers; ++l) first_id[l + 1] = first_id[l] + widths[l];
  const int num_vertices = first_id.back();
  std::vector<int> layer_of(num_vertices);
  for (int l = 0; l < num_layers; ++l) {
    for (int v = first_id[l]; v < first_id[l + 1]; ++v) layer_of[v] = l;
  }

  std::vector<std::pair<int, int>> full_edges;
  for (int l = 0; l + 1 < num_layers; ++l) {
    for (int a = first_id[l]; a < first_id[l + 1]; ++a) {
      for (int b = first_id[l + 1]; b < first_id[l + 2]; ++b) full_edges.emplace_back(a, b);
    }
  }
  const auto num_remove = static_cast<std::size_t>(std::floor(prune_fraction * full_edges.size()));

  constexpr int kMaxAttempts = 64;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(attempt)}));
    std::vector<std::pair<int, int>> edges = full_edges;
    // Partial Fisher-Yates: the first num_remove slots become the removed set.
    for (std::size_t i = 0; i < num_remove; ++i) {
      const std::size_t j = i + rng.below(edges.size() - i);
      std::swap(edges[i], edges[j]);
    }
    edges.erase(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(num_remove));

    std::vector<bool> alive(num_vertices, true);
    std::vector<int> out_deg(num_vertices, 0);
    std::vector<std::vector<int>> preds(num_vertices);
    for (auto [a, b] : edges) {
      ++out_deg[a];
      preds[b].push_back(a);
    }
    bool changed = true;
    while (changed) {
      changed = false;
      for (int v = 0; v < num_vertices; ++v) {
        if (!alive[v] || layer_of[v] == num_layers - 1 || out_deg[v] > 0) continue;
        alive[v] = false;
        changed = true;
        for (int p : preds[v]) {
          if (alive[p]) --out_deg[p];
        }
      }
    }
    if (!alive[0]) continue;

    GraphSpec spec;
    for (int l = 0; l < num_layers; ++l) {
      std::vector<std::string> layer;
      for (int v = first_id[l]; v < first_id[l + 1]; ++v) {
        if (alive[v]) layer.push_back(synth_label(l, v - first_id[l]));
      }
      spec.layers.push_back(std::move(layer));
    }
    for (auto [a, b] : edges) {
      if (alive[a] && alive[b]) {
        spec.edges.emplace_back(synth_label(layer_of[a], a - first_id[layer_of[a]]),
                                synth_label(layer_of[b], b - first_id[layer_of[b]]));
      }
    }
    return LayeredGraph::from_spec(spec);
  }
  throw Error(ErrorCode::kSynthesisFailed,
              "no valid graph after " + std::to_string(kMaxAttempts) + " attempts");
}

}  // namespace palmdiff
