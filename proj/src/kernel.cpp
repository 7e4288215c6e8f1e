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

#include "palmdiff/kernel.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numbers>

#include "palmdiff/error.hpp"

namespace palmdiff {

NoiseSchedule NoiseSchedule::cosine(int timesteps, double offset) {
  if (timesteps < 1 || !(offset > 0.0)) {
    throw Error(ErrorCode::kFormat, "cosine schedule needs T >= 1 and s > 0");
  }
  auto f = [&](int t) {
    const double c = std::cos((static_cast<double>(t) / timesteps + offset) / (1.0 + offset) *
                              std::numbers::pi / 2.0);
    return c * c;
  };
  const double f0 = f(0);
  std::vector<double> betas(timesteps);
  double prev = 1.0;
  for (int t = 1; t <= timesteps; ++t) {
    const double ab = f(t) / f0;
    betas[t - 1] = std::min(1.0 - ab / prev, kMaxBeta);
    prev = ab;
  }
  NoiseSchedule s = from_betas(std::move(betas));
  s.offset_ = offset;
  return s;
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  NoiseSchedule s;
  s.alpha_bar_.resize(betas.size() + 1);
  s.alpha_bar_[0] = 1.0;
  for (std::size_t t = 0; t < betas.size(); ++t) {
    if (!(betas[t] > 0.0 && betas[t] <= 1.0)) {
      throw Error(ErrorCode::kFormat, "beta out of (0, 1]");
    }
    s.alpha_bar_[t + 1] = s.alpha_bar_[t] * (1.0 - betas[t]);
  }
  s.betas_ = std::move(betas);
  return s;
}

TransitionKernel::TransitionKernel(std::shared_ptr<const PalmShape> shape, NoiseSchedule schedule)
    : shape_(std::move(shape)), schedule_(std::move(schedule)) {}

Eigen::MatrixXd TransitionKernel::step_block(int degree, double beta) {
  Eigen::MatrixXd q = Eigen::MatrixXd::Constant(degree, degree, beta / degree);
  q.diagonal().array() += 1.0 - beta;
  return q;
}

Eigen::MatrixXd TransitionKernel::cumulative_block(int degree, double alpha_bar) {
  Eigen::MatrixXd q = Eigen::MatrixXd::Constant(degree, degree, (1.0 - alpha_bar) / degree);
  q.diagonal().array() += alpha_bar;
  return q;
}

Eigen::MatrixXd TransitionKernel::step_matrix(VertexId v, int t) const {
  const int width = shape_->max_degree();
  const int d = shape_->degree(v);
  // Identity on padding, which is never sampled.
  Eigen::MatrixXd q = Eigen::MatrixXd::Identity(width, width);
  q.topLeftCorner(d, d) = step_block(d, schedule_.beta(t));
  return q;
}

Eigen::MatrixXd TransitionKernel::cumulative_matrix(VertexId v, int t) const {
  const int width = shape_->max_degree();
  const int d = shape_->degree(v);
  Eigen::MatrixXd q = Eigen::MatrixXd::Identity(width, width);
  q.topLeftCorner(d, d) = cumulative_block(d, schedule_.alpha_bar(t));
  return q;
}

void reverse_step_probs(int degree, double beta_t, double alpha_bar_prev, int x_t,
                        std::span<const double> x0_probs, std::span<double> out) {
  const double inv_d = 1.0 / degree;
  double total = 0.0;
  for (int k = 0; k < degree; ++k) {
    const double likelihood = (k == x_t ? 1.0 - beta_t : 0.0) + beta_t * inv_d;
    const double prior = alpha_bar_prev * x0_probs[k] + (1.0 - alpha_bar_prev) * inv_d;
    out[k] = likelihood * prior;
    total += out[k];
  }
  assert(total > 0.0);
  for (int k = 0; k < degree; ++k) out[k] /= total;
}

}  // namespace palmdiff
