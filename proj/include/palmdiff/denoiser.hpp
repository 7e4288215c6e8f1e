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
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "palmdiff/palm.hpp"

namespace palmdiff {

struct DenoiserConfig {
  int hidden = 64;
  int blocks = 2;
  int time_dim = 32;
  std::uint64_t seed = 0;
};

// Named parameter tensors with their AdamW moment buffers.
struct ParameterSet {
  struct Tensor {
    std::string name;
    Eigen::MatrixXd value;
    Eigen::MatrixXd first_moment;
    Eigen::MatrixXd second_moment;
  };

  std::vector<Tensor> tensors;
  std::int64_t step = 0;

  std::size_t scalar_count() const;
};

// One matrix per parameter tensor, same order and shapes.
using Gradient = std::vector<Eigen::MatrixXd>;

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// p~(x0 | x_t): a residual MLP over the flattened PALM.
//
// Input is the V*D_max one-hot channel concatenated with the constant padding
// mask channel. A sinusoidal embedding of t is projected and added to the
// first hidden layer, followed by `blocks` residual blocks
// a <- a + W2 silu(W1 a + b1) + b2, and a linear read-out to one logit per
// active PALM entry. The read-out starts at zero so the initial prediction is
// uniform over each row.
class Denoiser {
 public:
  // Batch activations kept for the backward pass. Column b is example b.
  struct Tape {
    std::vector<int> choices;  // B * V, row-major by example
    std::vector<int> timesteps;
    Eigen::MatrixXd embedding;    // time_dim x B
    Eigen::MatrixXd pre_input;    // hidden x B
    std::vector<Eigen::MatrixXd> residual;  // blocks + 1 entries, hidden x B
    std::vector<Eigen::MatrixXd> block_pre;  // blocks entries
    Eigen::MatrixXd logits;       // active_count x B
  };

  Denoiser(std::shared_ptr<const PalmShape> shape, int timesteps, DenoiserConfig config);

  const PalmShape& shape() const { return *shape_; }
  std::shared_ptr<const PalmShape> shape_ptr() const { return shape_; }
  const DenoiserConfig& config() const { return config_; }
  int timesteps() const { return timesteps_; }

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  // Logits for one state; padding entries hold the padding sentinel. Throws
  // Error(kShapeMismatch) if x_t does not fit the shape or t is out of range.
  PalmDistribution predict(const Palm& x_t, int t) const;

  // Batched prediction in the active layout: `choices` holds B rows of V
  // selections (-1 on zero-degree rows); result is active_count x B.
  void predict_active(std::span<const int> choices, std::span<const int> timesteps,
                      Eigen::MatrixXd& logits) const;

  void forward(std::span<const int> choices, std::span<const int> timesteps, Tape& tape) const;

  // Gradient of sum_b <dlogits[:, b], logits[:, b]> with respect to the
  // parameters.
  Gradient backward(const Tape& tape, const Eigen::MatrixXd& dlogits) const;

  Gradient zero_gradient() const;

  // One AdamW step with decoupled weight decay. Throws
  // Error(kNonFiniteGradient) and leaves parameters untouched when any
  // gradient entry is not finite.
  void update(const Gradient& gradient, double learning_rate, double weight_decay,
              const AdamWOptions& options = {});

 private:
  enum : std::size_t { kInputWeight = 0, kInputBias = 1, kTimeWeight = 2, kFirstBlock = 3 };
  std::size_t block_index(int k, int which) const { return kFirstBlock + 4 * k + which; }
  std::size_t output_weight() const { return kFirstBlock + 4 * config_.blocks; }
  std::size_t output_bias() const { return output_weight() + 1; }

  void check_inputs(std::span<const int> choices, std::span<const int> timesteps) const;
  void input_layer(std::span<const int> choices, std::span<const int> timesteps,
                   Eigen::MatrixXd& embedding, Eigen::MatrixXd& pre) const;

  std::shared_ptr<const PalmShape> shape_;
  int timesteps_;
  DenoiserConfig config_;
  ParameterSet params_;
  Eigen::MatrixXd time_table_;  // time_dim x (T + 1)
  Eigen::VectorXd mask_;        // padding-mask channel
};

}  // namespace palmdiff
