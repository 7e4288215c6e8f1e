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

// On-disk formats.
//
//   graph   JSON {"format_version": 1, "layers": [[label...]...],
//                 "edges": [[src, dst]...]}
//   dataset text; "#"-prefixed header lines (format_version, graph
//           fingerprint, build spec) then one path per line as
//           comma-separated labels. Duplicate lines encode multiplicity.
//   paths   same line format as datasets, used for samples and enumerations.
//   reward  JSON {"format_version": 1, "label": str,
//                 "edges": [[src, dst, value]...]}

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "palmdiff/dataset.hpp"
#include "palmdiff/graph.hpp"
#include "palmdiff/guidance.hpp"

namespace palmdiff {

constexpr int kFormatVersion = 1;

std::string graph_to_json_text(const GraphSpec& spec);
// Throws Error(kFormat) on malformed JSON or a wrong format_version.
GraphSpec graph_spec_from_json_text(const std::string& text);

void write_graph(const std::filesystem::path& file, const LayeredGraph& g);
// Unvalidated contents; throws Error(kIo) or Error(kFormat).
GraphSpec read_graph_spec(const std::filesystem::path& file);
// Also throws Error(kInvalidGraph).
LayeredGraph read_graph(const std::filesystem::path& file);

// FNV-1a over the canonical serialisation, so the order in which a file lists
// its edges does not matter.
std::uint64_t graph_fingerprint(const LayeredGraph& g);
std::string fingerprint_hex(std::uint64_t fingerprint);

void write_paths(std::ostream& os, const LayeredGraph& g, std::span<const Path> paths);
// Throws Error(kInvalidPath) on lines that are not paths of g.
std::vector<Path> read_paths(std::istream& is, const LayeredGraph& g);

// Sample dump: a header with the generating configuration (compact JSON),
// one path per line, then '#'-prefixed summary lines. Readable by read_paths.
std::string samples_to_text(const LayeredGraph& g, std::span<const Path> paths,
                            const std::string& config_json, const std::string& summary);

void write_dataset(const std::filesystem::path& file, const Dataset& dataset);
// Throws Error(kFingerprintMismatch) if the header names another graph.
Dataset read_dataset(const std::filesystem::path& file, std::shared_ptr<const LayeredGraph> graph);

void write_reward(const std::filesystem::path& file, const LayeredGraph& g,
                  const RewardSpec& reward);
RewardSpec read_reward(const std::filesystem::path& file, const LayeredGraph& g,
                       std::shared_ptr<const PalmShape> shape);

std::string read_text_file(const std::filesystem::path& file);
void write_text_file(const std::filesystem::path& file, const std::string& text);

}  // namespace palmdiff
