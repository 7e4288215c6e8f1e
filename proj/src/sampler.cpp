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

#include "palmdiff/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "palmdiff/error.hpp"
#include "palmdiff/palm.hpp"
#include "palmdiff/rng.hpp"

namespace palmdiff {

std::string_view to_string(PosteriorMode mode) {
  return mode == PosteriorMode::kD3pm ? "d3pm-posterior" : "paper-literal";
}

PosteriorMode parse_posterior_mode(std::string_view text) {
  if (text == "d3pm-posterior" || text == "d3pm") return PosteriorMode::kD3pm;
  if (text == "paper-literal" || text == "literal") return PosteriorMode::kPaperLiteral;
  throw Error(ErrorCode::kFormat, "unknown posterior mode '" + std::string(text) + "'");
}

std::vector<Path> sample_paths(const Denoiser& model, const TransitionKernel& kernel,
                               const LayeredGraph& g, std::size_t n, std::uint64_t seed,
                               const SamplerOptions& options, const GuidanceTerm& guidance) {
  const PalmShape& shape = kernel.shape();
  if (!(shape == model.shape()) || shape.num_vertices() != g.num_vertices()) {
    throw Error(ErrorCode::kShapeMismatch, "model, kernel and graph disagree on PALM shape");
  }
  const int num_vertices = shape.num_vertices();
  const int width = shape.max_degree();
  const int T = kernel.timesteps();
  const NoiseSchedule& schedule = kernel.schedule();
  const std::size_t batch_size = std::max<std::size_t>(1, options.batch_size);

  std::vector<Path> out;
  out.reserve(n);

  std::vector<int> choices;
  std::vector<int> ts;
  std::vector<Rng> rngs;
  Eigen::MatrixXd logits;
  std::vector<double> full_logits(shape.size());
  std::vector<double> addend(shape.size());
  std::vector<double> x0_probs(static_cast<std::size_t>(width));
  std::vector<double> base(static_cast<std::size_t>(width));

  for (std::size_t first = 0; first < n; first += batch_size) {
    const std::size_t count = std::min(batch_size, n - first);
    choices.assign(count * num_vertices, -1);
    rngs.clear();
    for (std::size_t c = 0; c < count; ++c) {
      rngs.emplace_back(derive_seed(seed, {first + c}));
      int* row = choices.data() + c * num_vertices;
      for (VertexId v = 0; v < num_vertices; ++v) {
        const int d = shape.degree(v);
        if (d == 1) row[v] = 0;
        if (d >= 2) row[v] = static_cast<int>(rngs[c].below(static_cast<std::size_t>(d)));
      }
    }

    for (int t = T; t >= 1; --t) {
      ts.assign(count, t);
      model.predict_active(choices, ts, logits);
      const double beta = schedule.beta(t);
      const double ab_prev = schedule.alpha_bar(t - 1);
      const double ab_t = schedule.alpha_bar(t);

      for (std::size_t c = 0; c < count; ++c) {
        const double* z = logits.col(static_cast<Eigen::Index>(c)).data();
        int* row = choices.data() + c * num_vertices;
        if (guidance) {
          std::fill(full_logits.begin(), full_logits.end(), PalmDistribution::kPaddingLogit);
          for (VertexId v = 0; v < num_vertices; ++v) {
            for (int j = 0; j < shape.degree(v); ++j) {
              full_logits[shape.index(v, j)] = z[shape.active_offset(v) + j];
            }
          }
          guidance(full_logits, addend);
        }
        for (VertexId v = 0; v < num_vertices; ++v) {
          const int d = shape.degree(v);
          if (d < 2) continue;
          const double* zv = z + shape.active_offset(v);
          const double m = *std::max_element(zv, zv + d);
          double total = 0.0;
          for (int j = 0; j < d; ++j) total += x0_probs[j] = std::exp(zv[j] - m);
          for (int j = 0; j < d; ++j) x0_probs[j] /= total;

          auto base_row = std::span<double>(base.data(), d);
          if (options.mode == PosteriorMode::kPaperLiteral) {
            for (int j = 0; j < d; ++j) base_row[j] = ab_t * x0_probs[j] + (1.0 - ab_t) / d;
          } else if (t == 1) {
            std::copy_n(x0_probs.begin(), d, base_row.begin());
          } else {
            reverse_step_probs(d, beta, ab_prev, row[v], std::span<const double>(x0_probs.data(), d),
                               base_row);
          }

          if (guidance) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < d; ++j) {
              base_row[j] = std::max(std::log(base_row[j]) + addend[shape.index(v, j)],
                                     options.log_prob_floor);
              mx = std::max(mx, base_row[j]);
            }
            for (int j = 0; j < d; ++j) base_row[j] = std::exp(base_row[j] - mx);
          }
          row[v] = rngs[c].categorical(base_row);
        }
      }
    }

    for (std::size_t c = 0; c < count; ++c) {
      const Palm x0 = Palm::from_choices(
          shape, std::span<const int>(choices.data() + c * num_vertices, num_vertices));
      out.push_back(decode(g, x0));
    }
  }
  return out;
}

}  // namespace palmdiff
