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

#include "palmdiff/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "palmdiff/error.hpp"
#include "palmdiff/rng.hpp"

namespace palmdiff {

RewardSpec make_reward_spec(const LayeredGraph& g, std::shared_ptr<const PalmShape> shape,
                            std::vector<EdgeReward> edges, std::string label) {
  RewardPalm u = reward_palm(g, std::move(shape), edges);
  const double best = max_reward(g, u);
  return RewardSpec{std::move(u), best, std::move(label), std::move(edges)};
}

std::vector<double> transit_probs(const LayeredGraph& g, const PalmDistribution& probs) {
  const PalmShape& shape = probs.shape();
  std::vector<double> reach(g.num_vertices(), 0.0);
  reach[g.source()] = 1.0;
  // Ids are assigned layer by layer, so ascending order is topological.
  for (VertexId v = 0; v < g.num_vertices(); ++v) {
    if (reach[v] == 0.0) continue;
    const auto children = g.out_edges(v);
    for (std::size_t j = 0; j < children.size(); ++j) {
      reach[children[j]] += reach[v] * probs.values()[shape.index(v, static_cast<int>(j))];
    }
  }
  return reach;
}

RewardModel::RewardModel(const LayeredGraph& g, const RewardPalm& u)
    : g_(&g), u_(&u), probs_(u.shape().size(), 0.0), reach_(g.num_vertices(), 0.0),
      adjoint_(g.num_vertices(), 0.0),
      contrib_(static_cast<std::size_t>(std::max(1, u.shape().max_degree())), 0.0) {}

double RewardModel::evaluate(std::span<const double> logits, std::span<double> gradient) {
  const LayeredGraph& g = *g_;
  const PalmShape& shape = u_->shape();
  const auto u = u_->values();
  const int num_vertices = g.num_vertices();

  for (VertexId v = 0; v < num_vertices; ++v) {
    const int d = shape.degree(v);
    if (d == 0) continue;
    const double* z = logits.data() + shape.index(v, 0);
    double* p = probs_.data() + shape.index(v, 0);
    const double m = *std::max_element(z, z + d);
    double total = 0.0;
    for (int j = 0; j < d; ++j) total += p[j] = std::exp(z[j] - m);
    for (int j = 0; j < d; ++j) p[j] /= total;
  }

  std::fill(reach_.begin(), reach_.end(), 0.0);
  reach_[g.source()] = 1.0;
  double expected = 0.0;
  for (VertexId v = 0; v < num_vertices; ++v) {
    const auto children = g.out_edges(v);
    const std::size_t row = shape.index(v, 0);
    double local = 0.0;
    for (std::size_t j = 0; j < children.size(); ++j) {
      reach_[children[j]] += reach_[v] * probs_[row + j];
      local += probs_[row + j] * u[row + j];
    }
    expected += reach_[v] * local;
  }
  if (gradient.empty()) return expected;

  // adjoint_[v]: expected reward collected downstream of v.
  std::fill(gradient.begin(), gradient.end(), 0.0);
  for (VertexId v = num_vertices - 1; v >= 0; --v) {
    const auto children = g.out_edges(v);
    const std::size_t row = shape.index(v, 0);
    const int d = static_cast<int>(children.size());
    double a = 0.0;
    double* cv = contrib_.data();
    for (int j = 0; j < d; ++j) {
      cv[j] = u[row + j] + adjoint_[children[j]];
      a += probs_[row + j] * cv[j];
    }
    adjoint_[v] = a;
    // dR/dpi_v[j] = reach_v * c_j; through softmax: pi_j (c_j - sum_k pi_k c_k).
    if (d >= 2 && reach_[v] != 0.0) {
      for (int j = 0; j < d; ++j) gradient[row + j] = reach_[v] * probs_[row + j] * (cv[j] - a);
    }
  }
  return expected;
}

double expected_reward(const LayeredGraph& g, const PalmDistribution& logits,
                       const RewardPalm& u) {
  RewardModel model(g, u);
  return model.evaluate(logits.values(), {});
}

PalmField reward_gradient(const LayeredGraph& g, const PalmDistribution& logits,
                          const RewardPalm& u) {
  PalmField grad(logits.shape_ptr());
  RewardModel model(g, u);
  model.evaluate(logits.values(), grad.values());
  return grad;
}

double max_reward(const LayeredGraph& g, const RewardPalm& u) {
  std::vector<double> best(g.num_vertices(), 0.0);
  for (VertexId v = g.num_vertices() - 1; v >= 0; --v) {
    const auto children = g.out_edges(v);
    if (children.empty()) continue;
    double b = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < children.size(); ++j) {
      b = std::max(b, u.at(v, static_cast<int>(j)) + best[children[j]]);
    }
    best[v] = b;
  }
  return best[g.source()];
}

namespace {

std::vector<double> paths_from_source(const LayeredGraph& g) {
  std::vector<double> count(g.num_vertices(), 0.0);
  count[g.source()] = 1.0;
  for (VertexId v = 0; v < g.num_vertices(); ++v) {
    for (VertexId w : g.out_edges(v)) count[w] += count[v];
  }
  return count;
}

}  // namespace

double edge_path_fraction(const LayeredGraph& g, VertexId src, VertexId dst) {
  if (!g.edge_index(src, dst)) throw Error(ErrorCode::kUnknownEdge, g.label(src) + "->" + g.label(dst));
  const auto down = paths_to_sink(g);
  const auto up = paths_from_source(g);
  return up[src] * down[dst] / down[g.source()];
}

GuidedSamples guided_sample(const Denoiser& model, const TransitionKernel& kernel,
                            const LayeredGraph& g, const RewardPalm& u, const GuidanceConfig& cfg,
                            std::size_t n, std::uint64_t seed, std::size_t batch_size) {
  if (!std::isfinite(cfg.lambda) || cfg.lambda < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "guidance scale must be finite and >= 0");
  }
  if (!(u.shape() == kernel.shape())) {
    throw Error(ErrorCode::kShapeMismatch, "reward PALM does not match the model shape");
  }
  SamplerOptions options;
  options.mode = cfg.mode;
  options.batch_size = batch_size;

  GuidanceTerm term;
  if (cfg.lambda > 0.0) {
    auto reward_model = std::make_shared<RewardModel>(g, u);
    const double lambda = cfg.lambda;
    term = [reward_model, lambda](std::span<const double> logits, std::span<double> addend) {
      reward_model->evaluate(logits, addend);
      for (double& a : addend) a *= lambda;
    };
  }
  GuidedSamples out;
  out.paths = sample_paths(model, kernel, g, n, seed, options, term);
  out.rewards.reserve(out.paths.size());
  for (const Path& p : out.paths) out.rewards.push_back(path_reward(g, u, p));
  return out;
}

RewardSpec single_edge_reward(const LayeredGraph& g, std::shared_ptr<const PalmShape> shape,
                              double target_fraction) {
  const auto down = paths_to_sink(g);
  const auto up = paths_from_source(g);
  VertexId best_src = -1, best_dst = -1;
  double best_gap = std::numeric_limits<double>::infinity();
  for (VertexId v = 0; v < g.num_vertices(); ++v) {
    for (VertexId w : g.out_edges(v)) {
      const double gap = std::abs(up[v] * down[w] / down[g.source()] - target_fraction);
      if (gap < best_gap) {
        best_gap = gap;
        best_src = v;
        best_dst = w;
      }
    }
  }
  std::ostringstream label;
  label << "edge:" << g.label(best_src) << "->" << g.label(best_dst);
  return make_reward_spec(g, std::move(shape), {{best_src, best_dst, 1.0}}, label.str());
}

RewardSpec path_edges_reward(const LayeredGraph& g, std::shared_ptr<const PalmShape> shape, int k,
                             std::uint64_t seed) {
  const int num_edges_on_path = g.num_layers() - 1;
  if (k < 0 || k > num_edges_on_path) {
    throw Error(ErrorCode::kInvalidArgument, "k must lie in [0, number of layers - 1]");
  }
  Rng rng(derive_seed(seed, {0x726577617264ULL}));
  const auto down = paths_to_sink(g);
  // Uniform path: step to each child in proportion to its path count.
  std::vector<VertexId> path{g.source()};
  while (g.out_degree(path.back()) > 0) {
    const auto children = g.out_edges(path.back());
    std::vector<double> w;
    for (VertexId c : children) w.push_back(down[c]);
    path.push_back(children[rng.categorical(w)]);
  }
  std::vector<int> positions(num_edges_on_path);
  for (int i = 0; i < num_edges_on_path; ++i) positions[i] = i;
  for (int i = 0; i < k; ++i) {
    const auto pick = i + static_cast<int>(rng.below(static_cast<std::size_t>(num_edges_on_path - i)));
    std::swap(positions[i], positions[pick]);
  }
  std::sort(positions.begin(), positions.begin() + k);
  std::vector<EdgeReward> edges;
  for (int i = 0; i < k; ++i) edges.emplace_back(path[positions[i]], path[positions[i] + 1], 1.0);
  std::ostringstream label;
  label << "path-edges:" << k << ":" << seed;
  return make_reward_spec(g, std::move(shape), std::move(edges), label.str());
}

}  // namespace palmdiff
