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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "palmdiff/checkpoint.hpp"
#include "palmdiff/guidance.hpp"
#include "palmdiff/metrics.hpp"

namespace palmdiff {

struct SweepConfig {
  std::vector<double> lambdas{0.0, 1.0, 10.0, 100.0, 1000.0};
  std::size_t samples = 8192;          // guided samples per cell
  std::size_t target_samples = 65536;  // unguided draws for the target
  bool exact_target = false;           // condition the enumerated uniform law instead
  PosteriorMode mode = PosteriorMode::kD3pm;
  std::uint64_t seed = 0;
  int workers = 0;  // 0: one per hardware thread
  std::size_t batch_size = 256;
};

void to_json(nlohmann::json& j, const SweepConfig& c);
void from_json(const nlohmann::json& j, SweepConfig& c);

struct SweepRecord {
  std::string instance;
  double lambda = 0.0;
  double max_reward = 0.0;
  double mean_reward = 0.0;
  double std_reward = 0.0;
  double stderr_reward = 0.0;
  double target_retention = 0.0;
  // False when the target distribution was empty; metric columns are NaN.
  bool target_ok = true;
  MetricsReport metrics;
  double seconds = 0.0;
};

using SweepProgress = std::function<void(const SweepRecord&)>;

// One record per (instance, lambda) cell, in instance-major order no matter
// which worker finished first. Cell (i, k) samples with
// derive_seed(seed, {i, k}); targets are built once per instance.
std::vector<SweepRecord> run_sweep(const Checkpoint& ckpt, const LayeredGraph& g,
                                   std::span<const RewardSpec> instances, const SweepConfig& cfg,
                                   const SweepProgress& progress = {});

// Tidy table, one row per cell.
std::string sweep_csv_header();
void write_sweep_csv(std::ostream& os, std::span<const SweepRecord> records);

// Metric names accepted by plot_table and svg_line_chart.
std::vector<std::string> plot_metrics();

// x = lambda, one column per instance.
void write_plot_table(std::ostream& os, std::span<const SweepRecord> records,
                      const std::string& metric);

// Minimal SVG line chart with lambda on a symlog axis.
std::string svg_line_chart(std::span<const SweepRecord> records, const std::string& metric);

// Writes plots/<metric>.csv and plots/<metric>.svg under `dir`.
void write_plot_files(const std::filesystem::path& dir, std::span<const SweepRecord> records);

// End-to-end run from one JSON document: graph, dataset, training, reward
// instances and the sweep. Every artifact goes under the configured output
// directory along with the resolved configuration.
struct PipelineResult {
  std::filesystem::path output_dir;
  std::vector<SweepRecord> records;
  nlohmann::json resolved_config;
};
PipelineResult run_pipeline(const nlohmann::json& config, std::ostream& log);

}  // namespace palmdiff
