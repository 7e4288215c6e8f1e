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
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "palmdiff/denoiser.hpp"
#include "palmdiff/kernel.hpp"
#include "palmdiff/palm.hpp"
#include "palmdiff/rng.hpp"

namespace palmdiff {

// Draws x_t ~ Cat(Q_bar_t x0) row by row; zero-degree rows pass through and
// degree-1 rows consume no randomness. t = 0 returns x0.
Palm q_sample(const TransitionKernel& kernel, const Palm& x0, int t, Rng& rng);

// In-place variant over selection vectors (-1 on zero-degree rows).
void q_sample_choices(const TransitionKernel& kernel, std::span<const int> x0, int t, Rng& rng,
                      std::span<int> out);

// q(x_{t-1} | x_t, x0) for 2 <= t <= T, in probability form.
PalmDistribution q_posterior(const TransitionKernel& kernel, const Palm& x_t, const Palm& x0,
                             int t);

// p_theta(x_{t-1} | x_t) from predicted x0 logits z. At t = 1 this is
// softmax(z) itself.
PalmDistribution posterior_from_logits(const TransitionKernel& kernel,
                                       const PalmDistribution& logits, const Palm& x_t, int t);

PalmDistribution model_posterior(const Denoiser& model, const TransitionKernel& kernel,
                                 const Palm& x_t, int t);

struct LossTerms {
  double total = 0.0;        // gamma * vb + ce
  double cross_entropy = 0.0;
  double variational = 0.0;  // KL for t >= 2, -log p(x0 | x1) at t = 1
};

// One training example in selection form. `mask[v]` marks on-path vertices
// that carry an edge choice.
struct LossExample {
  std::vector<int> x_t;
  int t = 1;
  std::vector<int> x0;
  std::vector<std::uint8_t> mask;
};

// Masked loss of one example given its predicted logits in the active layout
// (column of Denoiser::predict_active). Writes dL/dlogits into `dlogits` when
// it is non-empty.
LossTerms example_loss(const TransitionKernel& kernel, const LossExample& ex,
                       std::span<const double> logits, double gamma, std::span<double> dlogits);

// Samples x_t from x0 at step t and evaluates the masked loss of the model.
LossTerms loss(const Denoiser& model, const TransitionKernel& kernel, const Palm& x0,
               std::span<const std::uint8_t> on_path_mask, int t, Rng& rng, double gamma);

// On-path vertices with an outgoing choice (terminal vertex excluded).
std::vector<std::uint8_t> on_path_mask(const LayeredGraph& g, const Path& p);

struct LossGradient {
  Gradient gradient;
  LossTerms mean;
};

// Exact reverse-mode gradient of the batch-mean loss.
LossGradient gradient_of_loss(const Denoiser& model, const TransitionKernel& kernel,
                              std::span<const LossExample> batch, double gamma);

}  // namespace palmdiff
