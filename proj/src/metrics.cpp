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

#include "palmdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "palmdiff/error.hpp"
#include "palmdiff/sampler.hpp"

namespace palmdiff {

namespace {

constexpr double kRewardTolerance = 1e-9;

template <typename Range>
double valid_rate_impl(const LayeredGraph& g, const Range& samples) {
  if (samples.empty()) throw Error(ErrorCode::kEmptySamples, "valid rate of an empty sample list");
  std::size_t ok = 0;
  for (const auto& s : samples) ok += is_valid_path(g, s) ? 1 : 0;
  return 100.0 * static_cast<double>(ok) / static_cast<double>(samples.size());
}

}  // namespace

double valid_rate(const LayeredGraph& g, std::span<const std::vector<VertexId>> samples) {
  return valid_rate_impl(g, samples);
}

double valid_rate(const LayeredGraph& g, std::span<const Path> samples) {
  return valid_rate_impl(g, samples);
}

// ---------------------------------------------------------------------------

EmpiricalPathDistribution EmpiricalPathDistribution::from_samples(std::span<const Path> samples) {
  std::vector<Path> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  EmpiricalPathDistribution d;
  d.sample_count_ = samples.size();
  const double n = static_cast<double>(samples.size());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    d.support_.push_back(sorted[i]);
    d.mass_.push_back(static_cast<double>(j - i) / n);
    i = j;
  }
  return d;
}

EmpiricalPathDistribution EmpiricalPathDistribution::from_weights(std::vector<Path> paths,
                                                                  std::vector<double> weights,
                                                                  std::size_t sample_count) {
  if (paths.size() != weights.size()) {
    throw Error(ErrorCode::kShapeMismatch, "paths and weights differ in length");
  }
  std::map<Path, double> merged;
  double total = 0.0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (!(weights[i] >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "negative path weight");
    if (weights[i] == 0.0) continue;
    merged[paths[i]] += weights[i];
    total += weights[i];
  }
  if (!(total > 0.0)) throw Error(ErrorCode::kInvalidArgument, "path weights sum to zero");
  EmpiricalPathDistribution d;
  d.sample_count_ = sample_count;
  for (auto& [p, w] : merged) {
    d.support_.push_back(p);
    d.mass_.push_back(w / total);
  }
  return d;
}

double EmpiricalPathDistribution::mass_of(const Path& p) const {
  const auto it = std::lower_bound(support_.begin(), support_.end(), p);
  return it != support_.end() && *it == p ? mass_[it - support_.begin()] : 0.0;
}

std::string_view to_string(DivergenceKind kind) {
  switch (kind) {
    case DivergenceKind::kKL: return "KL";
    case DivergenceKind::kL1: return "L1";
    case DivergenceKind::kTV: return "TV";
  }
  return "?";
}

AlignedMasses align(const EmpiricalPathDistribution& p, const EmpiricalPathDistribution& q) {
  AlignedMasses out;
  const auto sp = p.support(), sq = q.support();
  std::size_t i = 0, j = 0;
  while (i < sp.size() || j < sq.size()) {
    if (j == sq.size() || (i < sp.size() && sp[i] < sq[j])) {
      out.p.push_back(p.mass()[i++]);
      out.q.push_back(0.0);
    } else if (i == sp.size() || sq[j] < sp[i]) {
      out.p.push_back(0.0);
      out.q.push_back(q.mass()[j++]);
    } else {
      out.p.push_back(p.mass()[i++]);
      out.q.push_back(q.mass()[j++]);
    }
  }
  return out;
}

double kl_smoothing_epsilon(std::span<const double> p, std::span<const double> q,
                            std::size_t sample_count) {
  bool mismatch = false;
  for (std::size_t i = 0; i < p.size(); ++i) mismatch |= p[i] > 0.0 && q[i] == 0.0;
  if (!mismatch) return 0.0;
  const double n = sample_count > 0 ? static_cast<double>(sample_count) : static_cast<double>(p.size());
  return 1.0 / (10.0 * n);
}

double divergence(std::span<const double> p, std::span<const double> q, DivergenceKind kind,
                  std::size_t sample_count) {
  if (p.size() != q.size()) throw Error(ErrorCode::kShapeMismatch, "mass vectors differ in length");
  double out = 0.0;
  switch (kind) {
    case DivergenceKind::kL1:
      for (std::size_t i = 0; i < p.size(); ++i) out += std::abs(p[i] - q[i]);
      return out;
    case DivergenceKind::kTV:
      for (std::size_t i = 0; i < p.size(); ++i) out = std::max(out, std::abs(p[i] - q[i]));
      return out;
    case DivergenceKind::kKL: {
      const double eps = kl_smoothing_epsilon(p, q, sample_count);
      const double n = static_cast<double>(p.size());
      double sp = 0.0, sq = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        sp += p[i];
        sq += q[i];
      }
      sp += eps * n;
      sq += eps * n;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double pi = (p[i] + eps) / sp;
        const double qi = (q[i] + eps) / sq;
        if (pi > 0.0) out += pi * std::log(pi / qi);
      }
      return std::max(out, 0.0);
    }
  }
  return out;
}

double divergence(const EmpiricalPathDistribution& p, const EmpiricalPathDistribution& q,
                  DivergenceKind kind) {
  const AlignedMasses m = align(p, q);
  return divergence(m.p, m.q, kind, std::max(p.sample_count(), q.sample_count()));
}

// ---------------------------------------------------------------------------

namespace {

// ranks[i]: position of element i when sorted by descending mass, ties by
// ascending index.
std::vector<std::size_t> mass_ranks(std::span<const double> m) {
  std::vector<std::size_t> order(m.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return m[a] > m[b]; });
  std::vector<std::size_t> ranks(m.size());
  for (std::size_t r = 0; r < order.size(); ++r) ranks[order[r]] = r;
  return ranks;
}

}  // namespace

double sfd(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error(ErrorCode::kShapeMismatch, "mass vectors differ in length");
  const std::size_t n = p.size();
  if (n < 2) throw Error(ErrorCode::kUndefinedMetric, "SFD needs a support of at least 2");
  const auto rp = mass_ranks(p), rq = mass_ranks(q);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += std::abs(static_cast<double>(rp[i]) - static_cast<double>(rq[i]));
  }
  const double nn = static_cast<double>(n);
  const double max_distance = n % 2 == 0 ? nn * nn / 2.0 : (nn * nn - 1.0) / 2.0;
  return total / max_distance;
}

double sfd(const EmpiricalPathDistribution& p, const EmpiricalPathDistribution& q) {
  const AlignedMasses m = align(p, q);
  return sfd(m.p, m.q);
}

std::string_view to_string(IslKind kind) {
  switch (kind) {
    case IslKind::kL1: return "IS-L-L1";
    case IslKind::kKL: return "IS-L-KL";
    case IslKind::kTV: return "IS-L-TV";
    case IslKind::kSF: return "IS-L-SF";
  }
  return "?";
}

std::vector<std::vector<double>> layer_marginals(const LayeredGraph& g,
                                                 const EmpiricalPathDistribution& dist) {
  std::vector<int> slot(g.num_vertices());
  std::vector<std::vector<double>> out(g.num_layers());
  for (int l = 0; l < g.num_layers(); ++l) {
    const auto layer = g.layer(l);
    out[l].assign(layer.size(), 0.0);
    for (std::size_t k = 0; k < layer.size(); ++k) slot[layer[k]] = static_cast<int>(k);
  }
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const Path& p = dist.support()[i];
    if (static_cast<int>(p.vertices.size()) != g.num_layers()) {
      throw Error(ErrorCode::kInvalidPath, "path length differs from the number of layers");
    }
    for (int l = 0; l < g.num_layers(); ++l) {
      const VertexId v = p.vertices[l];
      if (v < 0 || v >= g.num_vertices() || g.layer_of(v) != l) {
        throw Error(ErrorCode::kInvalidPath, "vertex outside its layer");
      }
      out[l][slot[v]] += dist.mass()[i];
    }
  }
  // Renormalise so rounding in the accumulated masses cannot leak into the
  // singleton first layer.
  for (auto& layer : out) {
    double total = 0.0;
    for (double m : layer) total += m;
    if (total > 0.0) {
      for (double& m : layer) m /= total;
    }
  }
  return out;
}

std::vector<double> isl_per_layer(const LayeredGraph& g, const EmpiricalPathDistribution& target,
                                  const EmpiricalPathDistribution& generated, IslKind kind) {
  const auto mt = layer_marginals(g, target);
  const auto mg = layer_marginals(g, generated);
  const std::size_t n = std::max(target.sample_count(), generated.sample_count());
  std::vector<double> out(g.num_layers(), 0.0);
  for (int l = 0; l < g.num_layers(); ++l) {
    std::vector<double> p, q;
    for (std::size_t k = 0; k < mt[l].size(); ++k) {
      if (mt[l][k] > 0.0 || mg[l][k] > 0.0) {
        p.push_back(mt[l][k]);
        q.push_back(mg[l][k]);
      }
    }
    switch (kind) {
      case IslKind::kL1: out[l] = divergence(p, q, DivergenceKind::kL1); break;
      case IslKind::kTV: out[l] = divergence(p, q, DivergenceKind::kTV); break;
      case IslKind::kKL: out[l] = divergence(p, q, DivergenceKind::kKL, n); break;
      case IslKind::kSF: out[l] = p.size() < 2 ? 0.0 : sfd(p, q); break;
    }
  }
  return out;
}

double isl(const LayeredGraph& g, const EmpiricalPathDistribution& target,
           const EmpiricalPathDistribution& generated, IslKind kind) {
  const auto per_layer = isl_per_layer(g, target, generated, kind);
  return std::accumulate(per_layer.begin(), per_layer.end(), 0.0);
}

double isl(const LayeredGraph& g, std::span<const Path> target, std::span<const Path> generated,
           IslKind kind) {
  if (target.empty() || generated.empty()) {
    throw Error(ErrorCode::kEmptySamples, "IS-L needs non-empty sample sets");
  }
  return isl(g, EmpiricalPathDistribution::from_samples(target),
             EmpiricalPathDistribution::from_samples(generated), kind);
}

// ---------------------------------------------------------------------------

Eigen::VectorXd features(const LayeredGraph& g, const Path& p) {
  if (!is_valid_path(g, p)) throw Error(ErrorCode::kInvalidPath, "features of a non-path");
  const int width = g.max_out_degree();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.num_vertices()) * width);
  for (std::size_t l = 0; l + 1 < p.vertices.size(); ++l) {
    const VertexId v = p.vertices[l];
    f(static_cast<Eigen::Index>(v) * width + *g.edge_index(v, p.vertices[l + 1])) = 1.0;
  }
  return f;
}

namespace {

struct GaussianFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Weighted fit; `n` is the effective sample count for the unbiased
// correction (0 disables it).
GaussianFit fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& w, double n, double ridge) {
  GaussianFit out;
  out.mean = x * w;
  const Eigen::MatrixXd centred = x.colwise() - out.mean;
  out.cov = centred * w.asDiagonal() * centred.transpose();
  if (n > 1.0) out.cov *= n / (n - 1.0);
  out.cov.diagonal().array() += ridge;
  return out;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

double frechet(const GaussianFit& a, const GaussianFit& b) {
  if (a.mean.size() != b.mean.size()) {
    throw Error(ErrorCode::kShapeMismatch, "feature dimensions differ");
  }
  const Eigen::MatrixXd root_a = psd_sqrt(a.cov);
  Eigen::MatrixXd inner = root_a * b.cov * root_a;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner, Eigen::EigenvaluesOnly);
  const double cross = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double d = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * cross;
  return std::max(d, 0.0);
}

GaussianFit fit_columns(const Eigen::MatrixXd& x, double ridge) {
  if (x.cols() < 2) throw Error(ErrorCode::kInsufficientSamples, "FLGD needs at least 2 samples per side");
  const double n = static_cast<double>(x.cols());
  return fit(x, Eigen::VectorXd::Constant(x.cols(), 1.0 / n), n, ridge);
}

GaussianFit fit_distribution(const LayeredGraph& g, const EmpiricalPathDistribution& d,
                             double ridge) {
  if (d.empty() || d.sample_count() == 1) {
    throw Error(ErrorCode::kInsufficientSamples, "FLGD needs at least 2 samples per side");
  }
  const Eigen::Index dim = static_cast<Eigen::Index>(g.num_vertices()) * g.max_out_degree();
  Eigen::MatrixXd x(dim, static_cast<Eigen::Index>(d.size()));
  Eigen::VectorXd w(static_cast<Eigen::Index>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) {
    x.col(static_cast<Eigen::Index>(i)) = features(g, d.support()[i]);
    w(static_cast<Eigen::Index>(i)) = d.mass()[i];
  }
  return fit(x, w, static_cast<double>(d.sample_count()), ridge);
}

}  // namespace

double flgd(const Eigen::MatrixXd& target, const Eigen::MatrixXd& generated, double ridge) {
  return frechet(fit_columns(target, ridge), fit_columns(generated, ridge));
}

double flgd(const LayeredGraph& g, const EmpiricalPathDistribution& target,
            const EmpiricalPathDistribution& generated, double ridge) {
  return frechet(fit_distribution(g, target, ridge), fit_distribution(g, generated, ridge));
}

// ---------------------------------------------------------------------------

EmpiricalPathDistribution exact_path_distribution(const LayeredGraph& g,
                                                  const PalmDistribution& logits,
                                                  std::size_t cap) {
  const PalmDistribution probs = logits.form() == PalmDistribution::Form::kLogits
                                     ? logits.to_probabilities()
                                     : logits;
  std::vector<Path> paths = enumerate_paths(g, cap);
  std::vector<double> weights;
  weights.reserve(paths.size());
  for (const Path& p : paths) {
    double w = 1.0;
    for (std::size_t l = 0; l + 1 < p.vertices.size(); ++l) {
      w *= probs.at(p.vertices[l], *g.edge_index(p.vertices[l], p.vertices[l + 1]));
    }
    weights.push_back(w);
  }
  return EmpiricalPathDistribution::from_weights(std::move(paths), std::move(weights));
}

TargetDistribution condition_on_max_reward(const LayeredGraph& g, const RewardSpec& reward,
                                           std::span<const Path> samples) {
  std::vector<Path> kept;
  for (const Path& p : samples) {
    if (std::abs(path_reward(g, reward.u, p) - reward.max_reward) <= kRewardTolerance) {
      kept.push_back(p);
    }
  }
  if (kept.empty()) {
    std::ostringstream os;
    os << "none of " << samples.size() << " samples reached R_max = " << reward.max_reward;
    throw Error(ErrorCode::kEmptyConditional, os.str());
  }
  TargetDistribution out;
  out.drawn = samples.size();
  out.retention = static_cast<double>(kept.size()) / static_cast<double>(samples.size());
  out.distribution = EmpiricalPathDistribution::from_samples(kept);
  return out;
}

TargetDistribution target_distribution(const Denoiser& model, const TransitionKernel& kernel,
                                       const LayeredGraph& g, const RewardSpec& reward,
                                       std::size_t n, std::uint64_t seed,
                                       std::size_t batch_size) {
  SamplerOptions options;
  options.batch_size = batch_size;
  const std::vector<Path> samples = sample_paths(model, kernel, g, n, seed, options);
  return condition_on_max_reward(g, reward, samples);
}

TargetDistribution exact_target_distribution(const LayeredGraph& g, const RewardSpec& reward,
                                             std::size_t cap) {
  const PalmDistribution uniform(reward.u.shape_ptr(), PalmDistribution::Form::kLogits);
  const EmpiricalPathDistribution all = exact_path_distribution(g, uniform, cap);
  std::vector<Path> kept;
  std::vector<double> weights;
  double retained = 0.0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const Path& p = all.support()[i];
    if (std::abs(path_reward(g, reward.u, p) - reward.max_reward) <= kRewardTolerance) {
      kept.push_back(p);
      weights.push_back(all.mass()[i]);
      retained += all.mass()[i];
    }
  }
  if (kept.empty()) throw Error(ErrorCode::kEmptyConditional, "no path reaches R_max");
  TargetDistribution out;
  out.retention = retained;
  out.distribution = EmpiricalPathDistribution::from_weights(std::move(kept), std::move(weights));
  return out;
}

// ---------------------------------------------------------------------------

std::string MetricsReport::csv_header() {
  return "valid_rate,kl,kl_epsilon,l1,tv,sfd,isl_l1,isl_kl,isl_tv,isl_sf,flgd,target_count,"
         "generated_count";
}

std::string MetricsReport::csv_row() const {
  std::ostringstream os;
  os.precision(10);
  os << valid_rate << ',' << kl << ',' << kl_epsilon << ',' << l1 << ',' << tv << ',' << sfd << ','
     << isl_l1 << ',' << isl_kl << ',' << isl_tv << ',' << isl_sf << ',' << flgd << ','
     << target_count << ',' << generated_count;
  return os.str();
}

MetricsReport evaluate_metrics(const LayeredGraph& g, const EmpiricalPathDistribution& target,
                               std::span<const Path> generated) {
  if (generated.empty()) throw Error(ErrorCode::kEmptySamples, "no generated samples");
  if (target.empty()) throw Error(ErrorCode::kEmptySamples, "empty target distribution");
  MetricsReport r;
  r.valid_rate = valid_rate(g, generated);
  const auto gen = EmpiricalPathDistribution::from_samples(generated);
  r.target_count = target.sample_count();
  r.generated_count = gen.sample_count();

  const AlignedMasses m = align(target, gen);
  const std::size_t n = std::max(target.sample_count(), gen.sample_count());
  r.kl = divergence(m.p, m.q, DivergenceKind::kKL, n);
  r.kl_epsilon = kl_smoothing_epsilon(m.p, m.q, n);
  r.l1 = divergence(m.p, m.q, DivergenceKind::kL1);
  r.tv = divergence(m.p, m.q, DivergenceKind::kTV);
  r.sfd = m.p.size() < 2 ? std::numeric_limits<double>::quiet_NaN() : sfd(m.p, m.q);
  r.isl_l1 = isl(g, target, gen, IslKind::kL1);
  r.isl_kl = isl(g, target, gen, IslKind::kKL);
  r.isl_tv = isl(g, target, gen, IslKind::kTV);
  r.isl_sf = isl(g, target, gen, IslKind::kSF);
  const bool enough = (target.sample_count() != 1) && gen.sample_count() >= 2;
  r.flgd = enough ? flgd(g, target, gen) : std::numeric_limits<double>::quiet_NaN();
  return r;
}

}  // namespace palmdiff
