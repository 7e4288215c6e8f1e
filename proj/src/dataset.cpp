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

#include "palmdiff/dataset.hpp"

#include <cmath>
#include <sstream>

#include "palmdiff/error.hpp"
#include "palmdiff/rng.hpp"

namespace palmdiff {

std::string MultiplicityLaw::describe() const {
  std::ostringstream os;
  if (kind == Kind::kConstant) {
    os << "constant:" << constant;
  } else {
    os << "zipf:" << zipf_s << ":" << cap;
  }
  return os.str();
}

MultiplicityLaw MultiplicityLaw::parse(const std::string& text) {
  std::istringstream is(text);
  std::string kind;
  std::getline(is, kind, ':');
  std::string a, b;
  std::getline(is, a, ':');
  std::getline(is, b, ':');
  try {
    if (kind == "constant") return Constant(a.empty() ? 1 : std::stoi(a));
    if (kind == "zipf") return Zipf(a.empty() ? 1.1 : std::stod(a), b.empty() ? 64 : std::stoi(b));
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kFormat, "bad multiplicity law '" + text + "'");
}

namespace {

int draw_multiplicity(const MultiplicityLaw& law, Rng& rng) {
  if (law.kind == MultiplicityLaw::Kind::kConstant) return law.constant;
  std::vector<double> weights(law.cap);
  for (int k = 1; k <= law.cap; ++k) weights[k - 1] = std::pow(static_cast<double>(k), -law.zipf_s);
  return rng.categorical(weights) + 1;
}

}  // namespace

Dataset build_dataset(std::shared_ptr<const LayeredGraph> graph, const DatasetSpec& spec,
                      std::size_t enumeration_cap) {
  Dataset ds{graph, {}, spec};
  std::vector<Path> all = enumerate_paths(*graph, enumeration_cap);
  if (spec.mode == DatasetSpec::Mode::kAll) {
    ds.paths = std::move(all);
    return ds;
  }

  if (spec.count > all.size()) {
    throw Error(ErrorCode::kCountTooLarge, "requested " + std::to_string(spec.count) +
                                               " distinct paths, graph has " +
                                               std::to_string(all.size()));
  }
  if (spec.law.kind == MultiplicityLaw::Kind::kConstant && spec.law.constant < 1) {
    throw Error(ErrorCode::kFormat, "constant multiplicity must be >= 1");
  }
  Rng rng(derive_seed(spec.seed, {0x64617461ULL}));
  for (std::size_t i = 0; i < spec.count; ++i) {
    const std::size_t j = i + rng.below(all.size() - i);
    std::swap(all[i], all[j]);
  }
  for (std::size_t i = 0; i < spec.count; ++i) {
    const int copies = draw_multiplicity(spec.law, rng);
    for (int c = 0; c < copies; ++c) ds.paths.push_back(all[i]);
  }
  return ds;
}

}  // namespace palmdiff
