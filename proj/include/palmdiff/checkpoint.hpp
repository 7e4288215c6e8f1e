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

#include <filesystem>
#include <memory>
#include <string>

#include "json.hpp"

#include "palmdiff/denoiser.hpp"
#include "palmdiff/graph.hpp"
#include "palmdiff/kernel.hpp"
#include "palmdiff/train.hpp"

namespace palmdiff {

void to_json(nlohmann::json& j, const TrainConfig& c);
// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const DenoiserConfig& c);
void from_json(const nlohmann::json& j, DenoiserConfig& c);

struct Checkpoint {
  std::shared_ptr<const PalmShape> shape;
  std::shared_ptr<Denoiser> model;
  std::shared_ptr<const TransitionKernel> kernel;
  TrainConfig train;
  std::string graph_fingerprint;
};

// Model and kernel for a fresh (untrained) run on g.
Checkpoint make_untrained(const LayeredGraph& g, const TrainConfig& train,
                          const DenoiserConfig& model_config);

// JSON container: format_version, graph fingerprint, PALM degrees, configs,
// every named tensor with its shape and AdamW moments, and the step count.
std::string checkpoint_to_text(const LayeredGraph& g, const Checkpoint& ckpt);
void save_checkpoint(const std::filesystem::path& file, const LayeredGraph& g,
                     const Checkpoint& ckpt);

// Throws Error(kFingerprintMismatch) when the file was written for another
// graph, Error(kFormat) on malformed contents and Error(kIo).
Checkpoint checkpoint_from_text(const std::string& text, const LayeredGraph& g);
Checkpoint load_checkpoint(const std::filesystem::path& file, const LayeredGraph& g);

}  // namespace palmdiff
