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
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "palmdiff/denoiser.hpp"
#include "palmdiff/graph.hpp"
#include "palmdiff/kernel.hpp"

namespace palmdiff {

// Which distribution over x_{t-1} the sampler draws from before guidance.
enum class PosteriorMode {
  // p_theta(x_{t-1} | x_t) from the predicted x0 distribution and x_t.
  kD3pm,
  // Q_bar_t applied to the predicted x0 distribution, ignoring x_t.
  kPaperLiteral,
};

std::string_view to_string(PosteriorMode mode);
PosteriorMode parse_posterior_mode(std::string_view text);

// Additive term on the base log-probabilities of one chain at one step.
// Receives the x0 logits z in V x D_max layout (padding at -inf) and
// overwrites `addend` (same layout). Must be safe to call concurrently on
// distinct buffers.
using GuidanceTerm = std::function<void(std::span<const double> logits, std::span<double> addend)>;

struct SamplerOptions {
  PosteriorMode mode = PosteriorMode::kD3pm;
  std::size_t batch_size = 256;
  // Lower clamp for guided log-probabilities before renormalisation.
  double log_prob_floor = -80.0;
};

// Runs n independent reverse chains from uniform x_T down to x_0 and decodes
// them. Chain i draws all of its randomness from derive_seed(seed, {i}), so
// results do not depend on batch_size. Without a guidance term the base
// probabilities are sampled directly.
std::vector<Path> sample_paths(const Denoiser& model, const TransitionKernel& kernel,
                               const LayeredGraph& g, std::size_t n, std::uint64_t seed,
                               const SamplerOptions& options = {},
                               const GuidanceTerm& guidance = {});

inline std::vector<Path> sample_unguided(const Denoiser& model, const TransitionKernel& kernel,
                                         const LayeredGraph& g, std::size_t n,
                                         std::uint64_t seed) {
  return sample_paths(model, kernel, g, n, seed);
}

}  // namespace palmdiff
