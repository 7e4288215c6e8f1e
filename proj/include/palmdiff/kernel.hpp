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

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "palmdiff/palm.hpp"

namespace palmdiff {

// beta_1..beta_T and the running products alpha_bar_0..alpha_bar_T.
class NoiseSchedule {
 public:
  static constexpr double kMaxBeta = 0.999;

  // alpha_bar(t) = f(t)/f(0), f(t) = cos^2(((t/T) + s)/(1 + s) * pi/2), with
  // beta_t = 1 - alpha_bar(t)/alpha_bar(t-1) clipped to kMaxBeta.
  static NoiseSchedule cosine(int timesteps, double offset = 0.008);

  // Explicit betas (each in (0, 1]); index 0 of `betas` is beta_1.
  static NoiseSchedule from_betas(std::vector<double> betas);

  int timesteps() const { return static_cast<int>(betas_.size()); }
  double beta(int t) const { return betas_[t - 1]; }
  // Product of (1 - beta) up to t; alpha_bar(0) == 1.
  double alpha_bar(int t) const { return alpha_bar_[t]; }
  double offset() const { return offset_; }

 private:
  std::vector<double> betas_;
  std::vector<double> alpha_bar_;
  double offset_ = 0.0;
};

// Per-vertex uniform-mixing transition matrices. For D_v > 0 the upper-left
// D_v x D_v block of Q_t^v is (1 - beta_t) I + (beta_t / D_v) 11^T and the
// cumulative product is alpha_bar_t I + ((1 - alpha_bar_t) / D_v) 11^T.
// Rows with D_v = 0 use the identity.
class TransitionKernel {
 public:
  TransitionKernel(std::shared_ptr<const PalmShape> shape, NoiseSchedule schedule);

  const PalmShape& shape() const { return *shape_; }
  std::shared_ptr<const PalmShape> shape_ptr() const { return shape_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  int timesteps() const { return schedule_.timesteps(); }

  // D_max x D_max matrices; entries (i, j) are P(next = i | current = j).
  Eigen::MatrixXd step_matrix(VertexId v, int t) const;
  Eigen::MatrixXd cumulative_matrix(VertexId v, int t) const;

  static Eigen::MatrixXd step_block(int degree, double beta);
  static Eigen::MatrixXd cumulative_block(int degree, double alpha_bar);

 private:
  std::shared_ptr<const PalmShape> shape_;
  NoiseSchedule schedule_;
};

// Posterior over x_{t-1} for one vertex of degree D:
//   w_k = Q_t[x_t, k] * (Q_bar_{t-1} x0_probs)_k, normalised,
// where x0_probs is a distribution over the D categories (a one-hot for the
// exact forward posterior, the model's prediction for the reverse model).
void reverse_step_probs(int degree, double beta_t, double alpha_bar_prev, int x_t,
                        std::span<const double> x0_probs, std::span<double> out);

}  // namespace palmdiff
