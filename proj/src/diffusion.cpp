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

#include "palmdiff/diffusion.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "palmdiff/error.hpp"

namespace palmdiff {

namespace {

constexpr int kMaxStackDegree = 64;

void softmax(std::span<const double> logits, std::span<double> out) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) total += out[j] = std::exp(logits[j] - m);
  for (double& p : out) p /= total;
}

void check_degree(int d) {
  if (d > kMaxStackDegree) throw Error(ErrorCode::kShapeMismatch, "out-degree above 64 unsupported");
}

}  // namespace

void q_sample_choices(const TransitionKernel& kernel, std::span<const int> x0, int t, Rng& rng,
                      std::span<int> out) {
  const PalmShape& shape = kernel.shape();
  const double keep = kernel.schedule().alpha_bar(t);
  for (VertexId v = 0; v < shape.num_vertices(); ++v) {
    const int d = shape.degree(v);
    out[v] = x0[v];
    if (d < 2 || t == 0) continue;
    // Cat(alpha_bar * onehot + (1 - alpha_bar)/D): keep with prob alpha_bar,
    // otherwise resample uniformly (which may land on x0 again).
    std::array<double, kMaxStackDegree> w{};
    check_degree(d);
    for (int j = 0; j < d; ++j) w[j] = (1.0 - keep) / d + (j == x0[v] ? keep : 0.0);
    out[v] = rng.categorical(std::span<const double>(w.data(), d));
  }
}

Palm q_sample(const TransitionKernel& kernel, const Palm& x0, int t, Rng& rng) {
  const std::vector<int> c0 = x0.choices();
  std::vector<int> ct(c0.size());
  q_sample_choices(kernel, c0, t, rng, ct);
  return Palm::from_choices(kernel.shape(), ct);
}

PalmDistribution q_posterior(const TransitionKernel& kernel, const Palm& x_t, const Palm& x0,
                             int t) {
  PalmDistribution out(kernel.shape_ptr(), PalmDistribution::Form::kProbabilities);
  const PalmShape& shape = kernel.shape();
  const double beta = kernel.schedule().beta(t);
  const double ab_prev = kernel.schedule().alpha_bar(t - 1);
  for (VertexId v = 0; v < shape.num_vertices(); ++v) {
    const int d = shape.degree(v);
    if (d == 0) continue;
    check_degree(d);
    std::array<double, kMaxStackDegree> onehot{};
    onehot[x0.selected(v)] = 1.0;
    reverse_step_probs(d, beta, ab_prev, x_t.selected(v), std::span<const double>(onehot.data(), d),
                       out.active_row(v));
  }
  return out;
}

PalmDistribution posterior_from_logits(const TransitionKernel& kernel,
                                       const PalmDistribution& logits, const Palm& x_t, int t) {
  const PalmDistribution x0_probs = logits.to_probabilities();
  if (t == 1) return x0_probs;
  PalmDistribution out(kernel.shape_ptr(), PalmDistribution::Form::kProbabilities);
  const PalmShape& shape = kernel.shape();
  const double beta = kernel.schedule().beta(t);
  const double ab_prev = kernel.schedule().alpha_bar(t - 1);
  for (VertexId v = 0; v < shape.num_vertices(); ++v) {
    if (shape.degree(v) == 0) continue;
    reverse_step_probs(shape.degree(v), beta, ab_prev, x_t.selected(v), x0_probs.active_row(v),
                       out.active_row(v));
  }
  return out;
}

PalmDistribution model_posterior(const Denoiser& model, const TransitionKernel& kernel,
                                 const Palm& x_t, int t) {
  return posterior_from_logits(kernel, model.predict(x_t, t), x_t, t);
}

std::vector<std::uint8_t> on_path_mask(const LayeredGraph& g, const Path& p) {
  std::vector<std::uint8_t> mask(g.num_vertices(), 0);
  for (std::size_t l = 0; l + 1 < p.vertices.size(); ++l) mask[p.vertices[l]] = 1;
  return mask;
}

LossTerms example_loss(const TransitionKernel& kernel, const LossExample& ex,
                       std::span<const double> logits, double gamma, std::span<double> dlogits) {
  const PalmShape& shape = kernel.shape();
  const bool want_grad = !dlogits.empty();
  if (want_grad) std::fill(dlogits.begin(), dlogits.end(), 0.0);

  LossTerms terms;
  const int t = ex.t;
  const double beta = kernel.schedule().beta(t);
  const double ab_prev = kernel.schedule().alpha_bar(t - 1);

  std::array<double, kMaxStackDegree> probs{}, post_true{}, post_model{}, dprobs{}, onehot{};
  for (VertexId v = 0; v < shape.num_vertices(); ++v) {
    const int d = shape.degree(v);
    if (!ex.mask[v] || d < 2) continue;  // degree-1 rows contribute exactly zero
    check_degree(d);
    const int off = shape.active_offset(v);
    const int c = ex.x0[v];
    auto p = std::span<double>(probs.data(), d);
    softmax(logits.subspan(off, d), p);

    const double ce = -std::log(p[c]);
    terms.cross_entropy += ce;

    double vb = 0.0;
    std::fill(dprobs.begin(), dprobs.begin() + d, 0.0);
    if (t == 1) {
      vb = ce;
    } else {
      std::fill(onehot.begin(), onehot.begin() + d, 0.0);
      onehot[c] = 1.0;
      auto q = std::span<double>(post_true.data(), d);
      auto pm = std::span<double>(post_model.data(), d);
      reverse_step_probs(d, beta, ab_prev, ex.x_t[v], std::span<const double>(onehot.data(), d), q);
      reverse_step_probs(d, beta, ab_prev, ex.x_t[v], p, pm);
      for (int k = 0; k < d; ++k) {
        if (q[k] > 0.0) vb += q[k] * (std::log(q[k]) - std::log(pm[k]));
      }
      if (want_grad) {
        // dKL/dp~_j = (L_j abar / W) (1 - q_j / p_j), W the unnormalised mass.
        double w_total = 0.0;
        for (int k = 0; k < d; ++k) {
          const double lk = (k == ex.x_t[v] ? 1.0 - beta : 0.0) + beta / d;
          w_total += lk * (ab_prev * p[k] + (1.0 - ab_prev) / d);
        }
        for (int j = 0; j < d; ++j) {
          const double lj = (j == ex.x_t[v] ? 1.0 - beta : 0.0) + beta / d;
          dprobs[j] = lj * ab_prev / w_total * (1.0 - q[j] / pm[j]);
        }
      }
    }
    terms.variational += vb;

    if (want_grad) {
      // CE and the t = 1 reconstruction term share d/dz = p - onehot.
      const double ce_weight = 1.0 + (t == 1 ? gamma : 0.0);
      double mean = 0.0;
      for (int j = 0; j < d; ++j) mean += p[j] * dprobs[j];
      for (int j = 0; j < d; ++j) {
        const double dz_vb = t == 1 ? 0.0 : gamma * p[j] * (dprobs[j] - mean);
        dlogits[off + j] = ce_weight * (p[j] - (j == c ? 1.0 : 0.0)) + dz_vb;
      }
    }
  }
  terms.total = gamma * terms.variational + terms.cross_entropy;
  return terms;
}

LossTerms loss(const Denoiser& model, const TransitionKernel& kernel, const Palm& x0,
               std::span<const std::uint8_t> mask, int t, Rng& rng, double gamma) {
  LossExample ex;
  ex.x0 = x0.choices();
  ex.t = t;
  ex.mask.assign(mask.begin(), mask.end());
  ex.x_t.resize(ex.x0.size());
  q_sample_choices(kernel, ex.x0, t, rng, ex.x_t);
  Eigen::MatrixXd logits;
  const int ts[1] = {t};
  model.predict_active(ex.x_t, ts, logits);
  return example_loss(kernel, ex, std::span<const double>(logits.data(), logits.rows()), gamma, {});
}

LossGradient gradient_of_loss(const Denoiser& model, const TransitionKernel& kernel,
                              std::span<const LossExample> batch, double gamma) {
  LossGradient out{model.zero_gradient(), {}};
  if (batch.empty()) return out;

  const std::size_t num_vertices = static_cast<std::size_t>(kernel.shape().num_vertices());
  std::vector<int> choices;
  std::vector<int> ts;
  choices.reserve(batch.size() * num_vertices);
  for (const auto& ex : batch) {
    choices.insert(choices.end(), ex.x_t.begin(), ex.x_t.end());
    ts.push_back(ex.t);
  }
  Denoiser::Tape tape;
  model.forward(choices, ts, tape);

  const double scale = 1.0 / static_cast<double>(batch.size());
  Eigen::MatrixXd dlogits(tape.logits.rows(), tape.logits.cols());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto col = static_cast<Eigen::Index>(b);
    const LossTerms terms =
        example_loss(kernel, batch[b],
                     std::span<const double>(tape.logits.col(col).data(), tape.logits.rows()), gamma,
                     std::span<double>(dlogits.col(col).data(), dlogits.rows()));
    out.mean.total += terms.total * scale;
    out.mean.cross_entropy += terms.cross_entropy * scale;
    out.mean.variational += terms.variational * scale;
  }
  dlogits *= scale;
  out.gradient = model.backward(tape, dlogits);
  return out;
}

}  // namespace palmdiff
