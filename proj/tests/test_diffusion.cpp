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
#include "palmdiff/diffusion.hpp"

using namespace palmdiff;
using namespace palmdiff::testing;

namespace {

std::shared_ptr<const TransitionKernel> fig1_kernel(int timesteps) {
  const auto shape = std::make_shared<const PalmShape>(fig1());
  return std::make_shared<const TransitionKernel>(shape, NoiseSchedule::cosine(timesteps));
}

// A -> {B, C}: one vertex with two categories, the rest padding.
const LayeredGraph& two_way() {
  static const LayeredGraph g = [] {
    GraphSpec s;
    s.layers = {{"A"}, {"B", "C"}};
    s.edges = {{"A", "B"}, {"A", "C"}};
    return LayeredGraph::from_spec(s);
  }();
  return g;
}

LossExample random_example(const LayeredGraph& g, const TransitionKernel& k, int t, Rng& rng) {
  const auto paths = enumerate_paths(g);
  const Path& p = paths[rng.below(paths.size())];
  LossExample ex;
  ex.x0 = encode(g, p, rng).choices();
  ex.t = t;
  ex.mask = on_path_mask(g, p);
  ex.x_t.resize(ex.x0.size());
  q_sample_choices(k, ex.x0, t, rng, ex.x_t);
  return ex;
}

}  // namespace

TEST_SUITE("diffusion") {
  TEST_CASE("q_posterior equals the Bayes ratio of kernel matrices") {
    const auto k = fig1_kernel(32);
    const LayeredGraph& g = fig1();
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
      const int t = 2 + static_cast<int>(rng.below(31));
      const Path p = enumerate_paths(g)[rng.below(10)];
      const Palm x0 = encode(g, p, rng);
      const Palm xt = q_sample(*k, x0, t, rng);
      const PalmDistribution post = q_posterior(*k, xt, x0, t);
      for (VertexId v = 0; v < g.num_vertices(); ++v) {
        const int d = g.out_degree(v);
        if (d == 0) continue;
        const Eigen::MatrixXd qt = k->step_matrix(v, t);
        const Eigen::MatrixXd qprev = k->cumulative_matrix(v, t - 1);
        const Eigen::MatrixXd qbar = k->cumulative_matrix(v, t);
        const int a = xt.selected(v), c = x0.selected(v);
        double s = 0.0;
        for (int j = 0; j < d; ++j) {
          const double expected = qt(a, j) * qprev(j, c) / qbar(a, c);
          CHECK(std::abs(post.at(v, j) - expected) < 1e-12);
          s += post.at(v, j);
        }
        CHECK(std::abs(s - 1.0) < 1e-12);
        if (d == 1) CHECK(post.at(v, 0) == 1.0);
      }
    }
  }

  TEST_CASE("q_sample keeps x0 at t = 0 and fixes degree-1 rows") {
    const auto k = fig1_kernel(64);
    Rng rng(2);
    const Palm x0 = encode(fig1(), path_of(fig1(), {"A", "B", "F", "I"}), rng);
    CHECK(q_sample(*k, x0, 0, rng) == x0);
    for (int i = 0; i < 100; ++i) {
      const Palm xt = q_sample(*k, x0, 64, rng);
      CHECK(xt.selected(id(fig1(), "F")) == 0);
      CHECK(xt.is_well_formed(k->shape()));
    }
  }

  TEST_CASE("q_sample single-step marginals for D = 2, beta = 0.5") {
    const auto shape = std::make_shared<const PalmShape>(two_way());
    const TransitionKernel k(shape, NoiseSchedule::from_betas({0.5}));
    Rng rng(3);
    const std::vector<int> x0{0, -1, -1};
    std::vector<int> xt(3);
    const int n = 100000;
    int stay = 0;
    for (int i = 0; i < n; ++i) {
      q_sample_choices(k, x0, 1, rng, xt);
      stay += xt[0] == 0 ? 1 : 0;
    }
    const double sigma = std::sqrt(0.75 * 0.25 / n);
    CHECK(std::abs(static_cast<double>(stay) / n - 0.75) < 3.0 * sigma);
  }

  TEST_CASE("point-mass logits reproduce q_posterior") {
    const auto k = fig1_kernel(16);
    const LayeredGraph& g = fig1();
    Rng rng(4);
    const Palm x0 = encode(g, path_of(g, {"A", "C", "G", "J"}), rng);
    const Palm xt = q_sample(*k, x0, 9, rng);
    PalmDistribution z(k->shape_ptr(), PalmDistribution::Form::kLogits);
    for (VertexId v = 0; v < g.num_vertices(); ++v) {
      auto row = z.active_row(v);
      for (std::size_t j = 0; j < row.size(); ++j) {
        row[j] = static_cast<int>(j) == x0.selected(v) ? 0.0 : PalmDistribution::kPaddingLogit;
      }
    }
    const PalmDistribution a = posterior_from_logits(*k, z, xt, 9);
    const PalmDistribution b = q_posterior(*k, xt, x0, 9);
    for (std::size_t i = 0; i < a.values().size(); ++i) {
      CHECK(std::abs(a.values()[i] - b.values()[i]) < 1e-14);
    }
  }

  TEST_CASE("uniform prediction: posterior is a two-term sum over x0") {
    const auto shape = std::make_shared<const PalmShape>(two_way());
    const TransitionKernel k(shape, NoiseSchedule::cosine(8));
    const PalmDistribution z(shape, PalmDistribution::Form::kLogits);
    const std::vector<int> c{1, -1, -1};
    const Palm xt = Palm::from_choices(*shape, c);
    for (int t = 2; t <= 8; ++t) {
      const auto q = k.step_matrix(0, t);
      const auto qp = k.cumulative_matrix(0, t - 1);
      double w[2];
      for (int j = 0; j < 2; ++j) w[j] = q(1, j) * (0.5 * qp(j, 0) + 0.5 * qp(j, 1));
      const PalmDistribution post = posterior_from_logits(k, z, xt, t);
      CHECK(post.at(0, 1) == doctest::Approx(w[1] / (w[0] + w[1])).epsilon(1e-13));
    }
    // t = 1 returns the predicted x0 distribution itself.
    CHECK(posterior_from_logits(k, z, xt, 1).at(0, 0) == doctest::Approx(0.5));
  }

  TEST_CASE("single-vertex loss matches a hand computation") {
    const auto shape = std::make_shared<const PalmShape>(two_way());
    const TransitionKernel k(shape, NoiseSchedule::cosine(10));
    const double beta = k.schedule().beta(5), ab = k.schedule().alpha_bar(4);
    const std::vector<double> logits{0.3, -0.4};
    const double p0 = 1.0 / (1.0 + std::exp(-0.7)), p1 = 1.0 - p0;
    LossExample ex{{1, -1, -1}, 5, {0, -1, -1}, {1, 0, 0}};

    // Posterior over x_{t-1} given x_t = 1.
    auto post = [&](double a0, double a1) {
      const double l0 = beta / 2, l1 = 1 - beta + beta / 2;
      const double w0 = l0 * (ab * a0 + (1 - ab) / 2), w1 = l1 * (ab * a1 + (1 - ab) / 2);
      return std::pair{w0 / (w0 + w1), w1 / (w0 + w1)};
    };
    const auto [q0, q1] = post(1.0, 0.0);
    const auto [m0, m1] = post(p0, p1);
    const double kl = q0 * std::log(q0 / m0) + q1 * std::log(q1 / m1);
    const double ce = -std::log(p0);
    for (double gamma : {0.0, 0.25, 1.0}) {
      const LossTerms terms = example_loss(k, ex, logits, gamma, {});
      CHECK(std::abs(terms.cross_entropy - ce) < 1e-12);
      CHECK(std::abs(terms.variational - kl) < 1e-12);
      CHECK(std::abs(terms.total - (gamma * kl + ce)) < 1e-12);
    }
    ex.t = 1;
    const LossTerms t1 = example_loss(k, ex, logits, 0.5, {});
    CHECK(std::abs(t1.variational - ce) < 1e-12);
    CHECK(std::abs(t1.total - 1.5 * ce) < 1e-12);
  }

  TEST_CASE("a perfect model has zero loss at t = 1") {
    const auto k = fig1_kernel(16);
    Rng rng(5);
    LossExample ex = random_example(fig1(), *k, 1, rng);
    std::vector<double> logits(k->shape().active_count(), 0.0);
    for (VertexId v = 0; v < 10; ++v) {
      if (k->shape().degree(v) > 0) logits[k->shape().active_offset(v) + ex.x0[v]] = 60.0;
    }
    const LossTerms terms = example_loss(*k, ex, logits, 1.0, {});
    CHECK(terms.total < 1e-20);
  }

  TEST_CASE("loss gradient with respect to logits matches central differences") {
    const LayeredGraph g = synth_pruned(toy_widths(), 0.5, 1);
    const auto shape = std::make_shared<const PalmShape>(g);
    const TransitionKernel k(shape, NoiseSchedule::cosine(64));
    Rng rng(6);
    double worst = 0.0;
    for (int trial = 0; trial < 40; ++trial) {
      const int t = trial < 8 ? 1 : 1 + static_cast<int>(rng.below(64));
      const LossExample ex = random_example(g, k, t, rng);
      std::vector<double> z(shape->active_count());
      for (double& x : z) x = 2.0 * rng.uniform() - 1.0;
      const double gamma = 0.5 + rng.uniform();
      std::vector<double> grad(z.size());
      example_loss(k, ex, z, gamma, grad);
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double h = 1e-5, keep = z[i];
        z[i] = keep + h;
        const double up = example_loss(k, ex, z, gamma, {}).total;
        z[i] = keep - h;
        const double down = example_loss(k, ex, z, gamma, {}).total;
        z[i] = keep;
        const double fd = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(fd - grad[i]) / std::max(1e-3, std::abs(fd) + std::abs(grad[i])));
      }
    }
    CHECK(worst < 1e-6);
  }

  TEST_CASE("off-path and degree-1 rows are masked out") {
    const auto k = fig1_kernel(16);
    Rng rng(7);
    const LossExample ex = random_example(fig1(), *k, 5, rng);
    std::vector<double> z(k->shape().active_count(), 0.0);
    std::vector<double> grad(z.size());
    example_loss(*k, ex, z, 1.0, grad);
    for (VertexId v = 0; v < 10; ++v) {
      if (ex.mask[v] && k->shape().degree(v) > 1) continue;
      for (int j = 0; j < k->shape().degree(v); ++j) {
        CHECK(grad[k->shape().active_offset(v) + j] == 0.0);
      }
    }
  }

  TEST_CASE("on-path mask covers every non-terminal path vertex") {
    const auto mask = on_path_mask(fig1(), path_of(fig1(), {"A", "C", "G", "H"}));
    const std::vector<std::uint8_t> expected{1, 0, 1, 0, 0, 0, 1, 0, 0, 0};
    CHECK(mask == expected);
  }
}
