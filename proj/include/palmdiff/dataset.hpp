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
#include <memory>
#include <string>
#include <vector>

#include "palmdiff/graph.hpp"

namespace palmdiff {

// How many copies of each sampled path go into a nonuniform dataset.
struct MultiplicityLaw {
  enum class Kind { kConstant, kZipf };

  Kind kind = Kind::kZipf;
  int constant = 1;     // kConstant
  double zipf_s = 1.1;  // kZipf: P(k) proportional to k^-s on 1..cap
  int cap = 64;

  static MultiplicityLaw Constant(int k) { return {Kind::kConstant, k, 1.1, k}; }
  static MultiplicityLaw Zipf(double s, int cap) { return {Kind::kZipf, 1, s, cap}; }

  std::string describe() const;
  static MultiplicityLaw parse(const std::string& text);
};

struct DatasetSpec {
  enum class Mode { kAll, kSampled };

  Mode mode = Mode::kAll;
  std::size_t count = 0;  // kSampled: number of distinct paths drawn
  MultiplicityLaw law;
  std::uint64_t seed = 0;
  double validation_split = 0.2;  // recorded metadata, applied by training
};

// Multiset of paths over a shared graph. Duplicates encode frequency.
struct Dataset {
  std::shared_ptr<const LayeredGraph> graph;
  std::vector<Path> paths;
  DatasetSpec spec;
};

// Throws Error(kCountTooLarge) when sampling more distinct paths than exist.
Dataset build_dataset(std::shared_ptr<const LayeredGraph> graph, const DatasetSpec& spec,
                      std::size_t enumeration_cap = 1'000'000);

}  // namespace palmdiff
