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

#include "palmdiff/palm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "palmdiff/error.hpp"

namespace palmdiff {

namespace {

std::vector<int> degrees_of(const LayeredGraph& g) {
  std::vector<int> d(g.num_vertices());
  for (VertexId v = 0; v < g.num_vertices(); ++v) d[v] = g.out_degree(v);
  return d;
}

}  // namespace

PalmShape::PalmShape(const LayeredGraph& g) : PalmShape(degrees_of(g)) {}

PalmShape::PalmShape(std::vector<int> degrees) : degrees_(std::move(degrees)) {
  active_offset_.resize(degrees_.size());
  for (std::size_t v = 0; v < degrees_.size(); ++v) {
    active_offset_[v] = active_count_;
    active_count_ += degrees_[v];
    max_degree_ = std::max(max_degree_, degrees_[v]);
  }
}

Palm Palm::from_choices(const PalmShape& shape, std::span<const int> choices) {
  Palm x(shape.num_vertices(), shape.max_degree());
  for (VertexId v = 0; v < shape.num_vertices(); ++v) {
    const int c = choices[v];
    if (shape.degree(v) == 0) {
      if (c != -1) throw Error(ErrorCode::kMalformedPalm, "selection on zero-degree row");
      continue;
    }
    if (c < 0 || c >= shape.degree(v)) {
      throw Error(ErrorCode::kMalformedPalm, "selection out of range at row " + std::to_string(v));
    }
    x.set(v, c, 1);
  }
  return x;
}

int Palm::selected(VertexId v) const {
  int found = -1;
  for (int j = 0; j < width_; ++j) {
    const std::uint8_t e = entries_[index(v, j)];
    if (e == 0) continue;
    if (e != 1 || found != -1) {
      throw Error(ErrorCode::kMalformedPalm, "row " + std::to_string(v) + " is not one-hot");
    }
    found = j;
  }
  return found;
}

std::vector<int> Palm::choices() const {
  std::vector<int> out(num_vertices_);
  for (VertexId v = 0; v < num_vertices_; ++v) out[v] = selected(v);
  return out;
}

bool Palm::is_well_formed(const PalmShape& shape) const {
  if (num_vertices_ != shape.num_vertices() || width_ != shape.max_degree()) return false;
  for (VertexId v = 0; v < num_vertices_; ++v) {
    int ones = 0;
    for (int j = 0; j < width_; ++j) {
      const std::uint8_t e = at(v, j);
      if (e > 1) return false;
      if (e == 1) {
        if (j >= shape.degree(v)) return false;
        ++ones;
      }
    }
    if (ones != (shape.degree(v) > 0 ? 1 : 0)) return false;
  }
  return true;
}

PalmDistribution::PalmDistribution(std::shared_ptr<const PalmShape> shape, Form form)
    : shape_(std::move(shape)), form_(form),
      values_(shape_->size(), form == Form::kLogits ? kPaddingLogit : 0.0) {
  for (VertexId v = 0; v < shape_->num_vertices(); ++v) {
    const int d = shape_->degree(v);
    for (double& x : active_row(v)) x = form == Form::kLogits ? 0.0 : 1.0 / d;
  }
}

PalmDistribution PalmDistribution::to_probabilities() const {
  if (form_ == Form::kProbabilities) return *this;
  PalmDistribution out(shape_, Form::kProbabilities);
  for (VertexId v = 0; v < shape_->num_vertices(); ++v) {
    auto in = active_row(v);
    if (in.empty()) continue;
    auto dst = out.active_row(v);
    const double m = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) total += dst[j] = std::exp(in[j] - m);
    for (double& p : dst) p /= total;
  }
  return out;
}

Palm encode(const LayeredGraph& g, const Path& p, Rng& rng) {
  if (!is_valid_path(g, p)) throw Error(ErrorCode::kInvalidPath, path_to_string(g, p));
  const int width = g.max_out_degree();
  Palm x(g.num_vertices(), width);
  std::vector<int> on_path(g.num_vertices(), -1);
  for (int l = 0; l + 1 < g.num_layers(); ++l) {
    on_path[p.vertices[l]] = *g.edge_index(p.vertices[l], p.vertices[l + 1]);
  }
  for (VertexId v = 0; v < g.num_vertices(); ++v) {
    const int d = g.out_degree(v);
    if (d == 0) continue;
    int j = on_path[v];
    if (j < 0) j = d == 1 ? 0 : static_cast<int>(rng.below(static_cast<std::size_t>(d)));
    x.set(v, j, 1);
  }
  return x;
}

Path decode(const LayeredGraph& g, const Palm& x) {
  if (x.num_vertices() != g.num_vertices() || x.width() != g.max_out_degree()) {
    throw Error(ErrorCode::kMalformedPalm, "PALM shape does not match graph");
  }
  Path p;
  p.vertices.reserve(g.num_layers());
  VertexId v = g.source();
  p.vertices.push_back(v);
  for (int l = 1; l < g.num_layers(); ++l) {
    const int j = x.selected(v);
    if (j < 0 || j >= g.out_degree(v)) {
      throw Error(ErrorCode::kMalformedPalm,
                  "row " + g.label(v) + " has no selection among its edges");
    }
    v = g.out_edges(v)[j];
    p.vertices.push_back(v);
  }
  return p;
}

RewardPalm reward_palm(const LayeredGraph& g, std::shared_ptr<const PalmShape> shape,
                       std::span<const std::tuple<VertexId, VertexId, double>> edge_rewards) {
  RewardPalm u(std::move(shape));
  for (const auto& [src, dst, value] : edge_rewards) {
    const auto j = g.edge_index(src, dst);
    if (!j) {
      const auto name = [&](VertexId v) {
        return v >= 0 && v < g.num_vertices() ? g.label(v) : std::to_string(v);
      };
      throw Error(ErrorCode::kUnknownEdge, name(src) + "->" + name(dst));
    }
    u.at(src, *j) = value;
  }
  return u;
}

double path_reward(const LayeredGraph& g, const RewardPalm& u, const Path& p) {
  double r = 0.0;
  for (std::size_t l = 0; l + 1 < p.vertices.size(); ++l) {
    r += u.at(p.vertices[l], *g.edge_index(p.vertices[l], p.vertices[l + 1]));
  }
  return r;
}

}  // namespace palmdiff
