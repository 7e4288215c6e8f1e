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

#include <cmath>
#include <limits>

#include "doctest.h"
#include "fixtures.hpp"
#include "palmdiff/error.hpp"
#include "palmdiff/guidance.hpp"
#include "palmdiff/metrics.hpp"

using namespace palmdiff;
using namespace palmdiff::testing;

namespace {

// Sum over enumerated paths of P(path | z) * reward(path).
double enumerated_reward(const LayeredGraph& g, const PalmDistribution& z, const RewardPalm& u) {
  const PalmDistribution p = z.to_probabilities();
  double total = 0.0;
  for (const Path& path : enumerate_paths(g)) {
    double prob = 1.0;
    for (std::size_t l = 0; l + 1 < path.vertices.size(); ++l) {
      const VertexId v = path.vertices[l];
      prob *= p.at(v, *g.edge_index(v, path.vertices[l + 1]));
    }
    total += prob * path_reward(g, u, path);
  }
  return total;
}

double enumerated_max(const LayeredGraph& g, const RewardPalm& u) {
  double best = -std::numeric_limits<double>::infinity();
  for (const Path& path : enumerate_paths(g)) best = std::max(best, path_reward(g, u, path));
  return best;
}

PalmDistribution random_logits(std::shared_ptr<const PalmShape> shape, Rng& rng, double scale) {
  PalmDistribution z(shape, PalmDistribution::Form::kLogits);
  for (VertexId v = 0; v < shape->num_vertices(); ++v) {
    for (double& x : z.active_row(v)) x = scale * (2 * rng.uniform() - 1);
  }
  return z;
}

RewardPalm random_reward(const LayeredGraph& g, std::shared_ptr<const PalmShape> shape, Rng& rng) {
  RewardPalm u(shape);
  for (VertexId v = 0; v < g.num_vertices(); ++v) {
    for (int j = 0; j < g.out_degree(v); ++j) {
      // Mix of sparse binary and dense real rewards.
      u.at(v, j) = rng.uniform() < 0.5 ? (rng.uniform() < 0.2 ? 1.0 : 0.0) : rng.uniform() * 3 - 1;
    }
  }
  return u;
}

RewardPalm edge_reward(const LayeredGraph& g, std::shared_ptr<const PalmShape> shape,
                       const std::string& src, const std::string& dst) {
  const std::vector<std::tuple<VertexId, VertexId, double>> e{{id(g, src), id(g, dst), 1.0}};
  return reward_palm(g, std::move(shape), e);
}

}  // namespace

TEST_SUITE("guidance") {
  TEST_CASE("transit probabilities on Fig 1 under uniform choices") {
    const auto shape = std::make_shared<const PalmShape>(fig1());
    const PalmDistribution uniform(shape, PalmDistribution::Form::kProbabilities);
    const auto p = transit_probs(fig1(), uniform);
    const std::vector<double> expected{1, 1. / 3, 1. / 3, 1. / 3, 1. / 3, 1. / 3, 1. / 3,
                                       1. / 3, 1. / 2, 1. / 6};
    for (int v = 0; v < 10; ++v) CHECK(p[v] == doctest::Approx(expected[v]).epsilon(1e-14));
  }

  TEST_CASE("transit probabilities of a point mass follow the path") {
    const LayeredGraph& g = fig1();
    const auto shape = std::make_shared<const PalmShape>(g);
    Rng rng(1);
    const Palm x = encode(g, path_of(g, {"A", "C", "G", "H"}), rng);
    PalmDistribution probs(shape, PalmDistribution::Form::kProbabilities);
    for (VertexId v = 0; v < 10; ++v) {
      auto row = probs.active_row(v);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] = static_cast<int>(j) == x.selected(v);
    }
    const auto p = transit_probs(g, probs);
    for (VertexId v = 0; v < 10; ++v) {
      const bool on = v == id(g, "A") || v == id(g, "C") || v == id(g, "G") || v == id(g, "H");
      CHECK(p[v] == (on ? 1.0 : 0.0));
    }
  }

  TEST_CASE("transit mass is conserved per layer") {
    Rng rng(2);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const LayeredGraph g = synth_pruned(toy_widths(), 0.5, seed);
      const auto shape = std::make_shared<const PalmShape>(g);
      const auto p = transit_probs(g, random_logits(shape, rng, 3.0).to_probabilities());
      for (int l = 0; l < g.num_layers(); ++l) {
        double s = 0.0;
        for (VertexId v : g.layer(l)) s += p[v];
        CHECK(std::abs(s - 1.0) < 1e-12);
      }
    }
  }

  TEST_CASE("expected reward on Fig 1 examples") {
    const LayeredGraph& g = fig1();
    const auto shape = std::make_shared<const PalmShape>(g);
    const RewardPalm gh = edge_reward(g, shape, "G", "H");
    const PalmDistribution uniform(shape, PalmDistribution::Form::kLogits);
    CHECK(expected_reward(g, uniform, gh) == doctest::Approx(1.0 / 6).epsilon(1e-14));
    CHECK(enumerated_reward(g, uniform, gh) == doctest::Approx(1.0 / 6).epsilon(1e-14));
    CHECK(expected_reward(g, uniform, RewardPalm(shape)) == 0.0);

    PalmDistribution acgh(shape, PalmDistribution::Form::kLogits);
    for (VertexId v = 0; v < 10; ++v) {
      for (double& x : acgh.active_row(v)) x = PalmDistribution::kPaddingLogit;
    }
    acgh.at(id(g, "A"), 1) = 0.0;
    acgh.at(id(g, "B"), 0) = 0.0;
    acgh.at(id(g, "C"), 1) = 0.0;
    acgh.at(id(g, "D"), 0) = 0.0;
    acgh.at(id(g, "E"), 0) = 0.0;
    acgh.at(id(g, "F"), 0) = 0.0;
    acgh.at(id(g, "G"), 0) = 0.0;
    CHECK(expected_reward(g, acgh, gh) == 1.0);
  }

  TEST_CASE("layer DP equals path enumeration on random graphs") {
    Rng rng(3);
    double worst = 0.0;
    int graphs = 0;
    for (std::uint64_t seed = 0; graphs < 20; ++seed) {
      const std::vector<int> widths{1, 3, 4, 4, 3, 4, 2};
      const LayeredGraph g = synth_pruned(widths, 0.3, seed);
      if (count_paths(g) > 1e4) continue;
      ++graphs;
      const auto shape = std::make_shared<const PalmShape>(g);
      for (int i = 0; i < 100; ++i) {
        const PalmDistribution z = random_logits(shape, rng, 4.0);
        const RewardPalm u = random_reward(g, shape, rng);
        worst = std::max(worst, std::abs(expected_reward(g, z, u) - enumerated_reward(g, z, u)));
      }
    }
    CHECK(worst < 1e-9);
  }

  TEST_CASE("expected reward is linear in u") {
    const LayeredGraph g = synth_pruned(toy_widths(), 0.5, 4);
    const auto shape = std::make_shared<const PalmShape>(g);
    Rng rng(4);
    for (int i = 0; i < 20; ++i) {
      const PalmDistribution z = random_logits(shape, rng, 2.0);
      const RewardPalm u1 = random_reward(g, shape, rng), u2 = random_reward(g, shape, rng);
      const double a = rng.uniform() * 4 - 2, b = rng.uniform() * 4 - 2;
      RewardPalm mix(shape);
      for (std::size_t k = 0; k < mix.values().size(); ++k) {
        mix.values()[k] = a * u1.values()[k] + b * u2.values()[k];
      }
      const double lhs = expected_reward(g, z, mix);
      const double rhs = a * expected_reward(g, z, u1) + b * expected_reward(g, z, u2);
      CHECK(std::abs(lhs - rhs) < 1e-12);
    }
  }

  TEST_CASE("reward gradient matches central differences") {
    Rng rng(5);
    double worst = 0.0;
    auto probe = [&](const LayeredGraph& g, PalmDistribution z, const RewardPalm& u) {
      const PalmField grad = reward_gradient(g, z, u);
      double scale = 0.0;
      for (double x : grad.values()) scale = std::max(scale, std::abs(x));
      for (VertexId v = 0; v < g.num_vertices(); ++v) {
        for (int j = 0; j < g.out_degree(v); ++j) {
          const double keep = z.at(v, j), h = 1e-5;
          z.at(v, j) = keep + h;
          const double up = expected_reward(g, z, u);
          z.at(v, j) = keep - h;
          const double down = expected_reward(g, z, u);
          z.at(v, j) = keep;
          const double fd = (up - down) / (2 * h);
          // Relative to the gradient's own scale so exact zeros do not blow up.
          worst = std::max(worst, std::abs(fd - grad.at(v, j)) / std::max(1e-3, scale));
        }
      }
    };
    const auto fig_shape = std::make_shared<const PalmShape>(fig1());
    probe(fig1(), PalmDistribution(fig_shape, PalmDistribution::Form::kLogits),
          edge_reward(fig1(), fig_shape, "G", "H"));
    for (int i = 0; i < 100; ++i) {
      const LayeredGraph g = synth_pruned(toy_widths(), 0.5, 100 + i);
      const auto shape = std::make_shared<const PalmShape>(g);
      probe(g, random_logits(shape, rng, 2.0), random_reward(g, shape, rng));
    }
    CHECK(worst < 1e-6);
  }

  TEST_CASE("gradient vanishes where the reward cannot depend on z") {
    const LayeredGraph& g = fig1();
    const auto shape = std::make_shared<const PalmShape>(g);
    Rng rng(6);
    const PalmDistribution z = random_logits(shape, rng, 1.0);
    const PalmField zero = reward_gradient(g, z, RewardPalm(shape));
    for (double x : zero.values()) CHECK(x == 0.0);

    // With A routed to B only, rows C, D, G are unreachable.
    PalmDistribution routed = z;
    routed.at(0, 1) = routed.at(0, 2) = PalmDistribution::kPaddingLogit;
    const PalmField grad = reward_gradient(g, routed, edge_reward(g, shape, "G", "H"));
    for (const char* label : {"C", "D", "G", "H", "I", "J"}) {
      for (int j = 0; j < 3; ++j) CHECK(grad.at(id(g, label), j) == 0.0);
    }
    for (double x : grad.values()) CHECK(std::isfinite(x));
  }

  TEST_CASE("max reward equals the enumeration maximum") {
    Rng rng(7);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const LayeredGraph g = synth_pruned(toy_widths(), 0.5, seed);
      const auto shape = std::make_shared<const PalmShape>(g);
      const RewardPalm u = random_reward(g, shape, rng);
      CHECK(max_reward(g, u) == doctest::Approx(enumerated_max(g, u)).epsilon(1e-12));
    }
  }

  TEST_CASE("edge path fraction and reward instances") {
    const LayeredGraph& g = fig1();
    CHECK(edge_path_fraction(g, id(g, "G"), id(g, "H")) == doctest::Approx(0.2));
    CHECK(edge_path_fraction(g, id(g, "A"), id(g, "C")) == doctest::Approx(0.4));
    const auto shape = std::make_shared<const PalmShape>(g);
    const RewardSpec one = single_edge_reward(g, shape, 0.1);
    CHECK(one.max_reward == 1.0);
    CHECK(one.edges.size() == 1);
    CHECK(one.label.rfind("edge:", 0) == 0);

    const LayeredGraph toy = synth_pruned(toy_widths(), 0.5, 1);
    const auto toy_shape = std::make_shared<const PalmShape>(toy);
    const RewardSpec a = path_edges_reward(toy, toy_shape, 3, 9);
    const RewardSpec b = path_edges_reward(toy, toy_shape, 3, 9);
    CHECK(a.edges == b.edges);
    CHECK(a.edges.size() == 3);
    // The edges lie on one path, so all three are attainable together.
    CHECK(a.max_reward == 3.0);
    CHECK(a.max_reward == enumerated_max(toy, a.u));

    const std::vector<EdgeReward> bogus{{id(g, "A"), id(g, "H"), 1.0}};
    CHECK_THROWS_AS(make_reward_spec(g, shape, bogus, "bad"), Error);
  }

  TEST_CASE("guided sampling: lambda = 0 reproduces unguided samples exactly") {
    const auto shape = std::make_shared<const PalmShape>(fig1());
    const TransitionKernel k(shape, NoiseSchedule::cosine(32));
    DenoiserConfig cfg;
    cfg.hidden = 16;
    Denoiser model(shape, 32, cfg);
    Rng rng(8);
    for (auto& t : model.params().tensors) {
      for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = 0.4 * (2 * rng.uniform() - 1);
    }
    const RewardPalm gh = edge_reward(fig1(), shape, "G", "H");
    const GuidedSamples guided = guided_sample(model, k, fig1(), gh, GuidanceConfig{}, 500, 11);
    const auto plain = sample_unguided(model, k, fig1(), 500, 11);
    CHECK(guided.paths == plain);
    for (std::size_t i = 0; i < plain.size(); ++i) {
      CHECK(guided.rewards[i] == path_reward(fig1(), gh, plain[i]));
    }
  }

  TEST_CASE("guided sampling rejects bad lambda") {
    const auto shape = std::make_shared<const PalmShape>(fig1());
    const TransitionKernel k(shape, NoiseSchedule::cosine(8));
    const Denoiser model(shape, 8, DenoiserConfig{});
    const RewardPalm gh = edge_reward(fig1(), shape, "G", "H");
    for (double bad : {-1.0, std::numeric_limits<double>::infinity(),
                       std::numeric_limits<double>::quiet_NaN()}) {
      try {
        guided_sample(model, k, fig1(), gh, GuidanceConfig{bad, PosteriorMode::kD3pm}, 4, 0);
        FAIL("expected invalid-argument");
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kInvalidArgument);
      }
    }
  }

  TEST_CASE("untrained model: reward rises with lambda and samples stay valid") {
    const LayeredGraph& g = fig1();
    const auto shape = std::make_shared<const PalmShape>(g);
    const TransitionKernel k(shape, NoiseSchedule::cosine(64));
    const Denoiser model(shape, 64, DenoiserConfig{});
    const RewardPalm gh = edge_reward(g, shape, "G", "H");
    const std::size_t n = 65536;
    double prev_mean = -1.0, prev_se = 0.0;
    for (double lambda : {0.0, 1.0, 10.0, 100.0}) {
      for (PosteriorMode mode : {PosteriorMode::kD3pm, PosteriorMode::kPaperLiteral}) {
        const std::size_t m = mode == PosteriorMode::kD3pm ? n : 2048;
        const GuidedSamples s = guided_sample(model, k, g, gh, {lambda, mode}, m, 21);
        CHECK(valid_rate(g, s.paths) == 100.0);
        if (mode != PosteriorMode::kD3pm) continue;
        double mean = 0.0;
        for (double r : s.rewards) mean += r;
        mean /= static_cast<double>(m);
        const double se = std::sqrt(mean * (1 - mean) / static_cast<double>(m));
        CHECK(mean + 2 * (se + prev_se) >= prev_mean);
        if (lambda == 0.0) CHECK(mean == doctest::Approx(1.0 / 6).epsilon(0.03));
        if (lambda == 100.0) CHECK(mean >= 0.95);
        prev_mean = mean;
        prev_se = se;
      }
    }
  }
}
