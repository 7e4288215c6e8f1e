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

#include "palmdiff/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "palmdiff/diffusion.hpp"
#include "palmdiff/error.hpp"
#include "palmdiff/palm.hpp"

namespace palmdiff {

namespace {

constexpr std::uint64_t kTrainStream = 0x747261696eULL;
constexpr std::uint64_t kValidationStream = 0x76616cULL;
constexpr std::uint64_t kShuffleStream = 0x73687566ULL;

LossExample make_example(const LayeredGraph& g, const TransitionKernel& kernel, const Path& path,
                         Rng& rng) {
  LossExample ex;
  const Palm x0 = encode(g, path, rng);
  ex.x0 = x0.choices();
  ex.t = 1 + static_cast<int>(rng.below(static_cast<std::size_t>(kernel.timesteps())));
  ex.mask = on_path_mask(g, path);
  ex.x_t.resize(ex.x0.size());
  q_sample_choices(kernel, ex.x0, ex.t, rng, ex.x_t);
  return ex;
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

void split_indices(std::size_t n, double validation_split, std::uint64_t seed,
                   std::vector<std::size_t>& train, std::vector<std::size_t>& validation) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, {kShuffleStream}));
  shuffle(order, rng);
  const auto held_out = static_cast<std::size_t>(std::floor(validation_split * static_cast<double>(n)));
  train.assign(order.begin(), order.end() - static_cast<std::ptrdiff_t>(held_out));
  validation.assign(order.end() - static_cast<std::ptrdiff_t>(held_out), order.end());
}

TrainReport train(Denoiser& model, const TransitionKernel& kernel, const Dataset& dataset,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  if (dataset.paths.empty()) throw Error(ErrorCode::kEmptyDataset, "no paths to train on");
  const LayeredGraph& g = *dataset.graph;

  TrainReport report;
  std::vector<std::size_t> train_idx, val_idx;
  split_indices(dataset.paths.size(), config.validation_split, config.seed, train_idx, val_idx);
  if (train_idx.empty()) throw Error(ErrorCode::kEmptyDataset, "validation split leaves no training data");
  report.train_size = train_idx.size();
  report.validation_size = val_idx.size();

  const auto batch_size = static_cast<std::size_t>(std::max(1, config.batch_size));
  std::int64_t steps = 0;
  std::vector<LossExample> batch;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.max_steps > 0 && steps >= config.max_steps) break;
    Rng order_rng(derive_seed(config.seed, {kShuffleStream, static_cast<std::uint64_t>(epoch)}));
    std::vector<std::size_t> order = train_idx;
    shuffle(order, order_rng);

    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0, ce_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      if (config.max_steps > 0 && steps >= config.max_steps) break;
      const std::size_t end = std::min(order.size(), start + batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) {
        Rng rng(derive_seed(config.seed, {kTrainStream, static_cast<std::uint64_t>(epoch), order[i]}));
        batch.push_back(make_example(g, kernel, dataset.paths[order[i]], rng));
      }
      LossGradient lg = gradient_of_loss(model, kernel, batch, config.gamma);
      if (!std::isfinite(lg.mean.total)) {
        std::ostringstream os;
        os << "loss " << lg.mean.total << " at epoch " << epoch << ", step " << steps
           << " (ce " << lg.mean.cross_entropy << ", vb " << lg.mean.variational << ")";
        throw Error(ErrorCode::kNonFiniteLoss, os.str());
      }
      model.update(lg.gradient, config.learning_rate, config.weight_decay);
      ++steps;
      const double n = static_cast<double>(end - start);
      loss_sum += lg.mean.total * n;
      ce_sum += lg.mean.cross_entropy * n;
      seen += end - start;
    }
    if (seen == 0) break;
    rec.steps = steps;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.train_ce = ce_sum / static_cast<double>(seen);

    rec.val_loss = rec.val_ce = std::numeric_limits<double>::quiet_NaN();
    if (!val_idx.empty()) {
      double vl = 0.0, vc = 0.0;
      for (std::size_t i : val_idx) {
        Rng rng(derive_seed(config.seed, {kValidationStream, static_cast<std::uint64_t>(epoch), i}));
        const LossExample ex = make_example(g, kernel, dataset.paths[i], rng);
        Eigen::MatrixXd logits;
        const int ts[1] = {ex.t};
        model.predict_active(ex.x_t, ts, logits);
        const LossTerms terms = example_loss(
            kernel, ex, std::span<const double>(logits.data(), logits.rows()), config.gamma, {});
        vl += terms.total;
        vc += terms.cross_entropy;
      }
      rec.val_loss = vl / static_cast<double>(val_idx.size());
      rec.val_ce = vc / static_cast<double>(val_idx.size());
    }
    report.curve.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return report;
}

void write_loss_csv(std::ostream& os, const TrainReport& report) {
  os << "epoch,steps,train_loss,train_ce,val_loss,val_ce\n";
  const auto old_precision = os.precision(17);
  for (const auto& r : report.curve) {
    os << r.epoch << ',' << r.steps << ',' << r.train_loss << ',' << r.train_ce << ',' << r.val_loss
       << ',' << r.val_ce << '\n';
  }
  os.precision(old_precision);
}

}  // namespace palmdiff
