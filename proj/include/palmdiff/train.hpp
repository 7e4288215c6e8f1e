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

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "palmdiff/dataset.hpp"
#include "palmdiff/denoiser.hpp"
#include "palmdiff/kernel.hpp"

namespace palmdiff {

struct TrainConfig {
  int timesteps = 256;
  double schedule_offset = 0.008;
  double gamma = 1.0;
  int epochs = 100;
  int batch_size = 64;
  double learning_rate = 2e-3;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  double validation_split = 0.2;
  // Stops after this many optimizer steps when positive.
  std::int64_t max_steps = 0;
};

struct EpochRecord {
  int epoch = 0;
  std::int64_t steps = 0;  // cumulative optimizer steps
  double train_loss = 0.0;
  double train_ce = 0.0;
  // NaN when the validation split is empty.
  double val_loss = 0.0;
  double val_ce = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> curve;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Deterministic split: dataset indices are shuffled with the config seed and
// the trailing validation_split fraction is held out.
void split_indices(std::size_t n, double validation_split, std::uint64_t seed,
                   std::vector<std::size_t>& train, std::vector<std::size_t>& validation);

// Minibatch AdamW on the masked loss. Each example is re-encoded every epoch
// (fresh off-path selections) and gets a uniform t in 1..T; all randomness is
// keyed by (seed, epoch, example index). Throws Error(kEmptyDataset) and
// Error(kNonFiniteLoss).
TrainReport train(Denoiser& model, const TransitionKernel& kernel, const Dataset& dataset,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

void write_loss_csv(std::ostream& os, const TrainReport& report);

}  // namespace palmdiff
