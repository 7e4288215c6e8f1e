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

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <tuple>
#include <vector>

#include "palmdiff/graph.hpp"
#include "palmdiff/rng.hpp"

namespace palmdiff {

// Row layout shared by every PALM-shaped object of one graph: V rows of width
// D_max, of which the first D_v entries of row v are active.
class PalmShape {
 public:
  explicit PalmShape(const LayeredGraph& g);
  explicit PalmShape(std::vector<int> degrees);

  int num_vertices() const { return static_cast<int>(degrees_.size()); }
  int max_degree() const { return max_degree_; }
  int degree(VertexId v) const { return degrees_[v]; }
  std::span<const int> degrees() const { return degrees_; }

  std::size_t size() const { return degrees_.size() * static_cast<std::size_t>(max_degree_); }
  std::size_t index(VertexId v, int j) const {
    return static_cast<std::size_t>(v) * max_degree_ + j;
  }

  // Ragged layout of active entries only: entry (v, j) sits at
  // active_offset(v) + j.
  int active_count() const { return active_count_; }
  int active_offset(VertexId v) const { return active_offset_[v]; }

  bool operator==(const PalmShape& other) const { return degrees_ == other.degrees_; }

 private:
  std::vector<int> degrees_;
  std::vector<int> active_offset_;
  int max_degree_ = 0;
  int active_count_ = 0;
};

// Padded adjacency-list matrix: a 0/1 matrix of V rows by D_max columns. Well
// formed when every row with D_v > 0 holds exactly one 1 among its first D_v
// entries and every other entry is 0.
class Palm {
 public:
  Palm(int num_vertices, int width)
      : num_vertices_(num_vertices), width_(width),
        entries_(static_cast<std::size_t>(num_vertices) * width, 0) {}

  // `choices[v]` is the selected edge index, -1 for zero out-degree rows.
  static Palm from_choices(const PalmShape& shape, std::span<const int> choices);

  int num_vertices() const { return num_vertices_; }
  int width() const { return width_; }

  std::uint8_t at(VertexId v, int j) const { return entries_[index(v, j)]; }
  void set(VertexId v, int j, std::uint8_t value) { entries_[index(v, j)] = value; }
  std::span<const std::uint8_t> row(VertexId v) const {
    return std::span(entries_).subspan(index(v, 0), width_);
  }
  std::span<const std::uint8_t> entries() const { return entries_; }

  // Index of the 1 in row v, or -1 for an all-zero row. Throws
  // Error(kMalformedPalm) if the row has more than one nonzero or a non-0/1
  // entry.
  int selected(VertexId v) const;

  // Per-row selections; throws like selected().
  std::vector<int> choices() const;

  bool is_well_formed(const PalmShape& shape) const;

  bool operator==(const Palm&) const = default;

 private:
  std::size_t index(VertexId v, int j) const { return static_cast<std::size_t>(v) * width_ + j; }

  int num_vertices_;
  int width_;
  std::vector<std::uint8_t> entries_;
};

// Per-vertex categorical distributions in PALM layout, as logits or as
// probabilities. Padding entries hold kPaddingLogit (logits) or 0
// (probabilities) and are never read by reductions.
class PalmDistribution {
 public:
  enum class Form { kLogits, kProbabilities };

  static constexpr double kPaddingLogit = -std::numeric_limits<double>::infinity();

  // Active entries start at 0 (logits) or uniform 1/D_v (probabilities).
  PalmDistribution(std::shared_ptr<const PalmShape> shape, Form form);

  const PalmShape& shape() const { return *shape_; }
  std::shared_ptr<const PalmShape> shape_ptr() const { return shape_; }
  Form form() const { return form_; }

  double& at(VertexId v, int j) { return values_[shape_->index(v, j)]; }
  double at(VertexId v, int j) const { return values_[shape_->index(v, j)]; }

  // The first D_v entries of row v.
  std::span<double> active_row(VertexId v) {
    return std::span(values_).subspan(shape_->index(v, 0), shape_->degree(v));
  }
  std::span<const double> active_row(VertexId v) const {
    return std::span(values_).subspan(shape_->index(v, 0), shape_->degree(v));
  }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  // Row-wise normalised exponentials over active entries.
  PalmDistribution to_probabilities() const;

 private:
  std::shared_ptr<const PalmShape> shape_;
  Form form_;
  std::vector<double> values_;
};

// Real values in PALM layout, zero on padding. Used for edge rewards and for
// gradients with respect to logits.
class PalmField {
 public:
  explicit PalmField(std::shared_ptr<const PalmShape> shape)
      : shape_(std::move(shape)), values_(shape_->size(), 0.0) {}

  const PalmShape& shape() const { return *shape_; }
  double at(VertexId v, int j) const { return values_[shape_->index(v, j)]; }
  double& at(VertexId v, int j) { return values_[shape_->index(v, j)]; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::shared_ptr<const PalmShape> shape_ptr() const { return shape_; }

 private:
  std::shared_ptr<const PalmShape> shape_;
  std::vector<double> values_;
};

using RewardPalm = PalmField;

// On-path rows select the path's edges; off-path rows with D_v > 0 draw a
// uniform selection, consuming `rng` in ascending vertex order. Throws
// Error(kInvalidPath).
Palm encode(const LayeredGraph& g, const Path& p, Rng& rng);

// Follows selected edges from the source. Throws Error(kMalformedPalm) if a
// traversed row is not a one-hot over its active entries.
Path decode(const LayeredGraph& g, const Palm& x);

// Throws Error(kUnknownEdge) for pairs that are not edges of g.
RewardPalm reward_palm(const LayeredGraph& g, std::shared_ptr<const PalmShape> shape,
                       std::span<const std::tuple<VertexId, VertexId, double>> edge_rewards);

// Sum of u over the edges of p.
double path_reward(const LayeredGraph& g, const RewardPalm& u, const Path& p);

}  // namespace palmdiff
