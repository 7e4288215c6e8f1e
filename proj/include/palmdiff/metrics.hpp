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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "palmdiff/denoiser.hpp"
#include "palmdiff/graph.hpp"
#include "palmdiff/guidance.hpp"
#include "palmdiff/kernel.hpp"

namespace palmdiff {

// Percentage of sequences that are paths of g. Throws Error(kEmptySamples).
double valid_rate(const LayeredGraph& g, std::span<const std::vector<VertexId>> samples);
double valid_rate(const LayeredGraph& g, std::span<const Path> samples);

// Distinct paths in canonical order with their probabilities. sample_count()
// is 0 for distributions that were not estimated from samples.
class EmpiricalPathDistribution {
 public:
  EmpiricalPathDistribution() = default;

  static EmpiricalPathDistribution from_samples(std::span<const Path> samples);
  // Merges duplicates and normalises; weights must be non-negative with a
  // positive sum.
  static EmpiricalPathDistribution from_weights(std::vector<Path> paths,
                                                std::vector<double> weights,
                                                std::size_t sample_count = 0);

  std::span<const Path> support() const { return support_; }
  std::span<const double> mass() const { return mass_; }
  std::size_t sample_count() const { return sample_count_; }
  std::size_t size() const { return support_.size(); }
  bool empty() const { return support_.empty(); }
  double mass_of(const Path& p) const;

 private:
  std::vector<Path> support_;
  std::vector<double> mass_;
  std::size_t sample_count_ = 0;
};

enum class DivergenceKind { kKL, kL1, kTV };
std::string_view to_string(DivergenceKind kind);

// Masses of p and q over their union support in canonical order.
struct AlignedMasses {
  std::vector<double> p;
  std::vector<double> q;
};
AlignedMasses align(const EmpiricalPathDistribution& p, const EmpiricalPathDistribution& q);

// Additive smoothing used by KL when p has mass where q has none:
// 1 / (10 N) with N the larger sample count (the union size for exact
// distributions). Zero when no smoothing is needed.
double kl_smoothing_epsilon(std::span<const double> p, std::span<const double> q,
                            std::size_t sample_count);

// KL(p || q), L1 = sum |p - q|, TV = max |p - q|.
double divergence(std::span<const double> p, std::span<const double> q, DivergenceKind kind,
                  std::size_t sample_count = 0);
double divergence(const EmpiricalPathDistribution& p, const EmpiricalPathDistribution& q,
                  DivergenceKind kind);

// Spearman footrule distance between the mass rankings of p and q over a
// common indexed support, normalised by its maximum. Ties in mass rank by
// ascending index. Throws Error(kUndefinedMetric) when the support has fewer
// than two elements.
double sfd(std::span<const double> p, std::span<const double> q);
double sfd(const EmpiricalPathDistribution& p, const EmpiricalPathDistribution& q);

enum class IslKind { kL1, kKL, kTV, kSF };
std::string_view to_string(IslKind kind);

// Vertex marginals per layer. Entry [l][k] is the mass of layer(l)[k].
std::vector<std::vector<double>> layer_marginals(const LayeredGraph& g,
                                                 const EmpiricalPathDistribution& dist);

// Per-layer dissimilarity of vertex marginals. SF over a layer compares the
// vertices seen in either distribution and contributes 0 below two of them.
std::vector<double> isl_per_layer(const LayeredGraph& g, const EmpiricalPathDistribution& target,
                                  const EmpiricalPathDistribution& generated, IslKind kind);
double isl(const LayeredGraph& g, const EmpiricalPathDistribution& target,
           const EmpiricalPathDistribution& generated, IslKind kind);
// Throws Error(kEmptySamples) if either set is empty.
double isl(const LayeredGraph& g, std::span<const Path> target, std::span<const Path> generated,
           IslKind kind);

// The path's PALM with off-path rows zeroed, flattened vertex-major. Throws
// Error(kInvalidPath).
Eigen::VectorXd features(const LayeredGraph& g, const Path& p);

constexpr double kFlgdRidge = 1e-6;

// Frechet distance between Gaussian fits of two feature sets (one column per
// sample). Throws Error(kInsufficientSamples) with fewer than 2 columns.
double flgd(const Eigen::MatrixXd& target, const Eigen::MatrixXd& generated,
            double ridge = kFlgdRidge);
// Same statistic from path distributions; needs sample counts of at least 2
// (exact distributions count as large samples).
double flgd(const LayeredGraph& g, const EmpiricalPathDistribution& target,
            const EmpiricalPathDistribution& generated, double ridge = kFlgdRidge);

// Exact distribution of decoded paths when each row samples from
// softmax(logits): P(path) = prod over its edges of the row probabilities.
EmpiricalPathDistribution exact_path_distribution(const LayeredGraph& g,
                                                  const PalmDistribution& logits,
                                                  std::size_t cap = 1'000'000);

struct TargetDistribution {
  EmpiricalPathDistribution distribution;
  double retention = 0.0;  // fraction of unguided samples kept
  std::size_t drawn = 0;
};

// Unguided samples conditioned on reaching R_max. Throws
// Error(kEmptyConditional) when no sample does.
TargetDistribution target_distribution(const Denoiser& model, const TransitionKernel& kernel,
                                       const LayeredGraph& g, const RewardSpec& reward,
                                       std::size_t n, std::uint64_t seed,
                                       std::size_t batch_size = 256);

// Keeps samples with reward R_max. Throws like target_distribution.
TargetDistribution condition_on_max_reward(const LayeredGraph& g, const RewardSpec& reward,
                                           std::span<const Path> samples);

// Exact mode for small graphs: the uniform-logit path distribution
// conditioned on R_max.
TargetDistribution exact_target_distribution(const LayeredGraph& g, const RewardSpec& reward,
                                             std::size_t cap = 1'000'000);

struct MetricsReport {
  double valid_rate = 0.0;
  double kl = 0.0;
  double kl_epsilon = 0.0;
  double l1 = 0.0;
  double tv = 0.0;
  double sfd = 0.0;
  double isl_l1 = 0.0;
  double isl_kl = 0.0;
  double isl_tv = 0.0;
  double isl_sf = 0.0;
  double flgd = 0.0;
  std::size_t target_count = 0;
  std::size_t generated_count = 0;

  static std::string csv_header();
  std::string csv_row() const;
};

// All metrics of `generated` against `target`. SFD is NaN when the union
// support has fewer than two paths.
MetricsReport evaluate_metrics(const LayeredGraph& g, const EmpiricalPathDistribution& target,
                               std::span<const Path> generated);

}  // namespace palmdiff
