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
#include <memory>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "palmdiff/denoiser.hpp"
#include "palmdiff/graph.hpp"
#include "palmdiff/kernel.hpp"
#include "palmdiff/palm.hpp"
#include "palmdiff/sampler.hpp"

namespace palmdiff {

using EdgeReward = std::tuple<VertexId, VertexId, double>;

struct RewardSpec {
  RewardPalm u;
  double max_reward = 0.0;
  std::string label;
  std::vector<EdgeReward> edges;
};

// Builds u from (src, dst, value) triples and computes R_max. Throws
// Error(kUnknownEdge).
RewardSpec make_reward_spec(const LayeredGraph& g, std::shared_ptr<const PalmShape> shape,
                            std::vector<EdgeReward> edges, std::string label);

struct GuidanceConfig {
  double lambda = 0.0;
  PosteriorMode mode = PosteriorMode::kD3pm;
};

// Probability of reaching each vertex when every row of `probs` (V x D_max,
// rows normalised over active entries) picks the next edge.
std::vector<double> transit_probs(const LayeredGraph& g, const PalmDistribution& probs);

// Expected path reward under softmax(z) and its gradient with respect to the
// active logits. Owns scratch buffers, so keep one instance per thread.
class RewardModel {
 public:
  RewardModel(const LayeredGraph& g, const RewardPalm& u);

  // `logits` and `gradient` use the V x D_max layout; padding is ignored on
  // input and written as 0. Pass an empty `gradient` to skip the backward pass.
  double evaluate(std::span<const double> logits, std::span<double> gradient);

  // Reach probabilities from the most recent evaluate().
  std::span<const double> reach() const { return reach_; }

 private:
  const LayeredGraph* g_;
  const RewardPalm* u_;
  std::vector<double> probs_;
  std::vector<double> reach_;
  std::vector<double> adjoint_;
  std::vector<double> contrib_;
};

double expected_reward(const LayeredGraph& g, const PalmDistribution& logits, const RewardPalm& u);

// Exact gradient of expected_reward with respect to every active logit.
PalmField reward_gradient(const LayeredGraph& g, const PalmDistribution& logits,
                          const RewardPalm& u);

// Largest path reward, by a max-plus pass of the same layer recursion.
double max_reward(const LayeredGraph& g, const RewardPalm& u);

// Fraction of all source-to-sink paths that use the edge src -> dst.
double edge_path_fraction(const LayeredGraph& g, VertexId src, VertexId dst);

struct GuidedSamples {
  std::vector<Path> paths;
  std::vector<double> rewards;
};

// Reverse chains with lambda * grad R(z) added to the base log-probabilities
// at every step. lambda = 0 reproduces sample_paths exactly. Throws
// Error(kInvalidArgument) for a negative or non-finite lambda.
GuidedSamples guided_sample(const Denoiser& model, const TransitionKernel& kernel,
                            const LayeredGraph& g, const RewardPalm& u, const GuidanceConfig& cfg,
                            std::size_t n, std::uint64_t seed, std::size_t batch_size = 256);

// Reward instances. A single edge reward picks the edge whose path fraction is
// closest to `target_fraction` (ties to the smallest (src, dst)).
RewardSpec single_edge_reward(const LayeredGraph& g, std::shared_ptr<const PalmShape> shape,
                              double target_fraction);

// k distinct edges of one random path, each worth 1, so R_max = k.
RewardSpec path_edges_reward(const LayeredGraph& g, std::shared_ptr<const PalmShape> shape, int k,
                             std::uint64_t seed);

}  // namespace palmdiff
