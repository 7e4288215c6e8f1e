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

#include "palmdiff/denoiser.hpp"

#include <algorithm>
#include <cmath>

#include "palmdiff/error.hpp"
#include "palmdiff/rng.hpp"

namespace palmdiff {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Eigen::MatrixXd silu(const Eigen::MatrixXd& x) {
  return x.unaryExpr([](double v) { return v * sigmoid(v); });
}

Eigen::MatrixXd silu_grad(const Eigen::MatrixXd& x) {
  return x.unaryExpr([](double v) {
    const double s = sigmoid(v);
    return s * (1.0 + v * (1.0 - s));
  });
}

ParameterSet::Tensor make_tensor(std::string name, int rows, int cols) {
  return {std::move(name), Eigen::MatrixXd::Zero(rows, cols), Eigen::MatrixXd::Zero(rows, cols),
          Eigen::MatrixXd::Zero(rows, cols)};
}

void fill_uniform(Eigen::MatrixXd& m, double bound, Rng& rng) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = (2.0 * rng.uniform() - 1.0) * bound;
  }
}

}  // namespace

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += static_cast<std::size_t>(t.value.size());
  return n;
}

Denoiser::Denoiser(std::shared_ptr<const PalmShape> shape, int timesteps, DenoiserConfig config)
    : shape_(std::move(shape)), timesteps_(timesteps), config_(config) {
  if (config_.hidden < 1 || config_.blocks < 0 || config_.time_dim < 2 || timesteps_ < 1) {
    throw Error(ErrorCode::kShapeMismatch, "invalid denoiser configuration");
  }
  const int hidden = config_.hidden;
  const int flat = static_cast<int>(shape_->size());
  const int active = shape_->active_count();

  auto& ts = params_.tensors;
  ts.push_back(make_tensor("input.weight", hidden, 2 * flat));
  ts.push_back(make_tensor("input.bias", hidden, 1));
  ts.push_back(make_tensor("time.weight", hidden, config_.time_dim));
  for (int k = 0; k < config_.blocks; ++k) {
    const std::string prefix = "block" + std::to_string(k);
    ts.push_back(make_tensor(prefix + ".fc1.weight", hidden, hidden));
    ts.push_back(make_tensor(prefix + ".fc1.bias", hidden, 1));
    ts.push_back(make_tensor(prefix + ".fc2.weight", hidden, hidden));
    ts.push_back(make_tensor(prefix + ".fc2.bias", hidden, 1));
  }
  ts.push_back(make_tensor("output.weight", active, hidden));
  ts.push_back(make_tensor("output.bias", active, 1));

  Rng rng(derive_seed(config_.seed, {0x696e6974ULL}));
  fill_uniform(ts[kInputWeight].value, 1.0 / std::sqrt(2.0 * flat), rng);
  fill_uniform(ts[kTimeWeight].value, 1.0 / std::sqrt(static_cast<double>(config_.time_dim)), rng);
  for (int k = 0; k < config_.blocks; ++k) {
    fill_uniform(ts[block_index(k, 0)].value, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
    fill_uniform(ts[block_index(k, 2)].value, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
  }

  const int half = config_.time_dim / 2;
  time_table_ = Eigen::MatrixXd::Zero(config_.time_dim, timesteps_ + 1);
  for (int t = 0; t <= timesteps_; ++t) {
    for (int i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * i / half);
      time_table_(i, t) = std::sin(t * freq);
      time_table_(half + i, t) = std::cos(t * freq);
    }
  }

  mask_ = Eigen::VectorXd::Zero(flat);
  for (VertexId v = 0; v < shape_->num_vertices(); ++v) {
    for (int j = 0; j < shape_->degree(v); ++j) mask_(static_cast<Eigen::Index>(shape_->index(v, j))) = 1.0;
  }
}

void Denoiser::check_inputs(std::span<const int> choices, std::span<const int> timesteps) const {
  const std::size_t num_vertices = static_cast<std::size_t>(shape_->num_vertices());
  if (choices.size() != timesteps.size() * num_vertices) {
    throw Error(ErrorCode::kShapeMismatch, "choice buffer does not match batch size");
  }
  for (int t : timesteps) {
    if (t < 1 || t > timesteps_) throw Error(ErrorCode::kShapeMismatch, "timestep out of range");
  }
}

void Denoiser::input_layer(std::span<const int> choices, std::span<const int> timesteps,
                           Eigen::MatrixXd& embedding, Eigen::MatrixXd& pre) const {
  const auto batch = static_cast<Eigen::Index>(timesteps.size());
  const int num_vertices = shape_->num_vertices();
  const int flat = static_cast<int>(shape_->size());
  const auto& w_in = params_.tensors[kInputWeight].value;
  const auto& w_time = params_.tensors[kTimeWeight].value;

  const Eigen::VectorXd constant =
      w_in.rightCols(flat) * mask_ + params_.tensors[kInputBias].value.col(0);

  embedding.resize(config_.time_dim, batch);
  for (Eigen::Index b = 0; b < batch; ++b) embedding.col(b) = time_table_.col(timesteps[b]);

  const bool shared_t =
      std::all_of(timesteps.begin(), timesteps.end(), [&](int t) { return t == timesteps[0]; });
  if (shared_t && batch > 0) {
    const Eigen::VectorXd col = constant + w_time * time_table_.col(timesteps[0]);
    pre = col.replicate(1, batch);
  } else {
    pre.noalias() = w_time * embedding;
    pre.colwise() += constant;
  }

  for (Eigen::Index b = 0; b < batch; ++b) {
    const int* row = choices.data() + b * num_vertices;
    auto dst = pre.col(b);
    for (VertexId v = 0; v < num_vertices; ++v) {
      if (row[v] >= 0) dst += w_in.col(static_cast<Eigen::Index>(shape_->index(v, row[v])));
    }
  }
}

void Denoiser::forward(std::span<const int> choices, std::span<const int> timesteps,
                       Tape& tape) const {
  check_inputs(choices, timesteps);
  tape.choices.assign(choices.begin(), choices.end());
  tape.timesteps.assign(timesteps.begin(), timesteps.end());
  input_layer(choices, timesteps, tape.embedding, tape.pre_input);

  tape.residual.resize(config_.blocks + 1);
  tape.block_pre.resize(config_.blocks);
  tape.residual[0] = silu(tape.pre_input);
  for (int k = 0; k < config_.blocks; ++k) {
    const auto& w1 = params_.tensors[block_index(k, 0)].value;
    const auto& b1 = params_.tensors[block_index(k, 1)].value;
    const auto& w2 = params_.tensors[block_index(k, 2)].value;
    const auto& b2 = params_.tensors[block_index(k, 3)].value;
    tape.block_pre[k].noalias() = w1 * tape.residual[k];
    tape.block_pre[k].colwise() += b1.col(0);
    tape.residual[k + 1] = tape.residual[k];
    tape.residual[k + 1].noalias() += w2 * silu(tape.block_pre[k]);
    tape.residual[k + 1].colwise() += b2.col(0);
  }
  tape.logits.noalias() = params_.tensors[output_weight()].value * tape.residual.back();
  tape.logits.colwise() += params_.tensors[output_bias()].value.col(0);
}

void Denoiser::predict_active(std::span<const int> choices, std::span<const int> timesteps,
                              Eigen::MatrixXd& logits) const {
  check_inputs(choices, timesteps);
  Eigen::MatrixXd embedding, pre;
  input_layer(choices, timesteps, embedding, pre);
  Eigen::MatrixXd a = silu(pre);
  Eigen::MatrixXd u;
  for (int k = 0; k < config_.blocks; ++k) {
    u.noalias() = params_.tensors[block_index(k, 0)].value * a;
    u.colwise() += params_.tensors[block_index(k, 1)].value.col(0);
    a.noalias() += params_.tensors[block_index(k, 2)].value * silu(u);
    a.colwise() += params_.tensors[block_index(k, 3)].value.col(0);
  }
  logits.noalias() = params_.tensors[output_weight()].value * a;
  logits.colwise() += params_.tensors[output_bias()].value.col(0);
}

PalmDistribution Denoiser::predict(const Palm& x_t, int t) const {
  if (x_t.num_vertices() != shape_->num_vertices() || x_t.width() != shape_->max_degree()) {
    throw Error(ErrorCode::kShapeMismatch, "PALM does not match the denoiser shape");
  }
  const std::vector<int> choices = x_t.choices();
  const int ts[1] = {t};
  Eigen::MatrixXd logits;
  predict_active(choices, ts, logits);
  PalmDistribution z(shape_, PalmDistribution::Form::kLogits);
  for (VertexId v = 0; v < shape_->num_vertices(); ++v) {
    auto row = z.active_row(v);
    for (std::size_t j = 0; j < row.size(); ++j) {
      row[j] = logits(shape_->active_offset(v) + static_cast<Eigen::Index>(j), 0);
    }
  }
  return z;
}

Gradient Denoiser::zero_gradient() const {
  Gradient g;
  g.reserve(params_.tensors.size());
  for (const auto& t : params_.tensors) g.push_back(Eigen::MatrixXd::Zero(t.value.rows(), t.value.cols()));
  return g;
}

Gradient Denoiser::backward(const Tape& tape, const Eigen::MatrixXd& dlogits) const {
  Gradient g = zero_gradient();
  const Eigen::Index batch = dlogits.cols();
  const int num_vertices = shape_->num_vertices();
  const int flat = static_cast<int>(shape_->size());

  g[output_weight()].noalias() = dlogits * tape.residual.back().transpose();
  g[output_bias()] = dlogits.rowwise().sum();
  Eigen::MatrixXd da = params_.tensors[output_weight()].value.transpose() * dlogits;

  for (int k = config_.blocks - 1; k >= 0; --k) {
    const auto& w1 = params_.tensors[block_index(k, 0)].value;
    const auto& w2 = params_.tensors[block_index(k, 2)].value;
    const Eigen::MatrixXd act = silu(tape.block_pre[k]);
    g[block_index(k, 2)].noalias() = da * act.transpose();
    g[block_index(k, 3)] = da.rowwise().sum();
    const Eigen::MatrixXd du = (w2.transpose() * da).cwiseProduct(silu_grad(tape.block_pre[k]));
    g[block_index(k, 0)].noalias() = du * tape.residual[k].transpose();
    g[block_index(k, 1)] = du.rowwise().sum();
    da.noalias() += w1.transpose() * du;
  }

  const Eigen::MatrixXd dpre = da.cwiseProduct(silu_grad(tape.pre_input));
  const Eigen::VectorXd dpre_sum = dpre.rowwise().sum();
  g[kInputBias] = dpre_sum;
  g[kTimeWeight].noalias() = dpre * tape.embedding.transpose();
  auto& dw_in = g[kInputWeight];
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int* row = tape.choices.data() + b * num_vertices;
    for (VertexId v = 0; v < num_vertices; ++v) {
      if (row[v] >= 0) dw_in.col(static_cast<Eigen::Index>(shape_->index(v, row[v]))) += dpre.col(b);
    }
  }
  for (int i = 0; i < flat; ++i) {
    if (mask_(i) != 0.0) dw_in.col(flat + i) += dpre_sum * mask_(i);
  }
  return g;
}

void Denoiser::update(const Gradient& gradient, double learning_rate, double weight_decay,
                      const AdamWOptions& options) {
  if (gradient.size() != params_.tensors.size()) {
    throw Error(ErrorCode::kShapeMismatch, "gradient tensor count");
  }
  for (std::size_t i = 0; i < gradient.size(); ++i) {
    const auto& value = params_.tensors[i].value;
    if (gradient[i].rows() != value.rows() || gradient[i].cols() != value.cols()) {
      throw Error(ErrorCode::kShapeMismatch, "gradient shape for " + params_.tensors[i].name);
    }
    if (!gradient[i].allFinite()) {
      throw Error(ErrorCode::kNonFiniteGradient, params_.tensors[i].name);
    }
  }

  ++params_.step;
  const double step = static_cast<double>(params_.step);
  const double correction1 = 1.0 - std::pow(options.beta1, step);
  const double correction2 = 1.0 - std::pow(options.beta2, step);
  for (std::size_t i = 0; i < gradient.size(); ++i) {
    auto& t = params_.tensors[i];
    t.first_moment = options.beta1 * t.first_moment + (1.0 - options.beta1) * gradient[i];
    t.second_moment =
        options.beta2 * t.second_moment + (1.0 - options.beta2) * gradient[i].cwiseAbs2();
    t.value *= 1.0 - learning_rate * weight_decay;
    t.value.array() -= learning_rate * (t.first_moment.array() / correction1) /
                       ((t.second_moment.array() / correction2).sqrt() + options.epsilon);
  }
}

}  // namespace palmdiff
