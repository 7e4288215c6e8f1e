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

#include <algorithm>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "palmdiff/dataset.hpp"
#include "palmdiff/error.hpp"
#include "palmdiff/graph.hpp"

using namespace palmdiff;
using namespace palmdiff::testing;

namespace {

// Independent path count: brute force over every vertex sequence with one
// vertex per layer.
std::size_t brute_force_paths(const LayeredGraph& g) {
  std::size_t count = 0;
  std::vector<VertexId> seq(g.num_layers());
  std::function<void(int)> rec = [&](int l) {
    if (l == g.num_layers()) {
      count += is_valid_path(g, seq) ? 1 : 0;
      return;
    }
    for (VertexId v : g.layer(l)) {
      seq[l] = v;
      rec(l + 1);
    }
  };
  rec(0);
  return count;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kIo;
}

}  // namespace

TEST_SUITE("graph") {
  TEST_CASE("fig1 graph is valid with dense layer-ordered ids") {
    const LayeredGraph& g = fig1();
    CHECK(validate(fig1_spec()).ok());
    CHECK(g.num_layers() == 4);
    CHECK(g.num_vertices() == 10);
    CHECK(g.num_edges() == 14);
    CHECK(g.max_out_degree() == 3);
    CHECK(g.source() == 0);
    const char* order = "ABCDEFGHIJ";
    for (int v = 0; v < 10; ++v) CHECK(g.label(v) == std::string(1, order[v]));
    CHECK(g.out_degree(id(g, "F")) == 1);
    CHECK(g.out_degree(id(g, "H")) == 0);
    CHECK(g.in_degree(id(g, "I")) == 2);
    CHECK(g.edge_index(id(g, "C"), id(g, "G")) == 1);
    CHECK_FALSE(g.edge_index(id(g, "C"), id(g, "F")).has_value());
  }

  TEST_CASE("adjacency is sorted by destination id regardless of file order") {
    GraphSpec s = fig1_spec();
    std::reverse(s.edges.begin(), s.edges.end());
    const LayeredGraph g = LayeredGraph::from_spec(s);
    for (VertexId v = 0; v < g.num_vertices(); ++v) {
      const auto out = g.out_edges(v);
      CHECK(std::is_sorted(out.begin(), out.end()));
    }
    CHECK(g.to_spec().edges == fig1().to_spec().edges);
  }

  TEST_CASE("validation reports each violated condition") {
    GraphSpec two_sources = fig1_spec();
    two_sources.layers[0].push_back("Z");
    CHECK(validate(two_sources).has(ViolationKind::kFirstLayerNotSingleton));

    GraphSpec skip = fig1_spec();
    skip.edges.emplace_back("A", "H");
    CHECK(validate(skip).has(ViolationKind::kCrossLayerEdge));

    GraphSpec backwards = fig1_spec();
    backwards.edges.emplace_back("E", "B");
    CHECK(validate(backwards).has(ViolationKind::kCrossLayerEdge));

    GraphSpec dead = fig1_spec();
    dead.edges.erase(std::find(dead.edges.begin(), dead.edges.end(),
                               std::pair<std::string, std::string>("F", "I")));
    const auto report = validate(dead);
    CHECK(report.has(ViolationKind::kDeadEnd));
    CHECK(report.summary().find("F") != std::string::npos);

    GraphSpec unknown = fig1_spec();
    unknown.edges.emplace_back("A", "Q");
    CHECK(validate(unknown).has(ViolationKind::kUnknownVertex));

    GraphSpec dup = fig1_spec();
    dup.edges.emplace_back("A", "B");
    CHECK(validate(dup).has(ViolationKind::kDuplicateEdge));

    GraphSpec dup_label = fig1_spec();
    dup_label.layers[2].push_back("B");
    CHECK(validate(dup_label).has(ViolationKind::kDuplicateLabel));

    GraphSpec empty_layer = fig1_spec();
    empty_layer.layers.insert(empty_layer.layers.begin() + 1, std::vector<std::string>{});
    CHECK(validate(empty_layer).has(ViolationKind::kEmptyLayer));

    GraphSpec one_layer;
    one_layer.layers = {{"A"}};
    CHECK(validate(one_layer).has(ViolationKind::kTooFewLayers));

    CHECK(code_of([&] { LayeredGraph::from_spec(dead); }) == ErrorCode::kInvalidGraph);
  }

  TEST_CASE("fig1 enumeration yields ten lexicographically ordered paths") {
    const LayeredGraph& g = fig1();
    const auto paths = enumerate_paths(g);
    REQUIRE(paths.size() == 10);
    CHECK(std::is_sorted(paths.begin(), paths.end()));
    CHECK(std::set<Path>(paths.begin(), paths.end()).size() == 10);
    for (const auto& p : paths) CHECK(is_valid_path(g, p));
    CHECK(path_to_string(g, paths.front()) == "A,B,E,H");
    CHECK(path_to_string(g, paths.back()) == "A,D,G,J");
    CHECK(count_paths(g) == 10.0);
    CHECK(brute_force_paths(g) == 10);
    CHECK(code_of([&] { enumerate_paths(g, 9); }) == ErrorCode::kCapExceeded);
  }

  TEST_CASE("path validity and label parsing") {
    const LayeredGraph& g = fig1();
    CHECK(is_valid_path(g, path_of(g, {"A", "C", "G", "H"})));
    const std::vector<VertexId> broken{id(g, "A"), id(g, "C"), id(g, "F"), id(g, "I")};
    CHECK_FALSE(is_valid_path(g, broken));
    const std::vector<VertexId> short_seq{id(g, "A"), id(g, "C"), id(g, "G")};
    CHECK_FALSE(is_valid_path(g, short_seq));
    const std::vector<VertexId> out_of_range{0, 2, 6, 42};
    CHECK_FALSE(is_valid_path(g, out_of_range));
    CHECK(code_of([&] { path_of(g, {"A", "C", "F", "I"}); }) == ErrorCode::kInvalidPath);
    CHECK(code_of([&] { path_of(g, {"A", "C", "G", "Q"}); }) == ErrorCode::kInvalidPath);
  }

  TEST_CASE("path counts match enumeration on random pruned graphs") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const std::vector<int> widths{1, 3, 4, 3, 4, 2};
      const LayeredGraph g = synth_pruned(widths, 0.4, seed);
      CHECK(validate(g.to_spec()).ok());
      const auto paths = enumerate_paths(g);
      CHECK(static_cast<double>(paths.size()) == count_paths(g));
      CHECK(paths.size() == brute_force_paths(g));
    }
  }

  TEST_CASE("layerwise_full connects adjacent layers completely") {
    const std::vector<int> widths{1, 3, 2, 4};
    const LayeredGraph g = layerwise_full(widths);
    CHECK(g.num_vertices() == 10);
    CHECK(g.num_edges() == 3 + 6 + 8);
    CHECK(count_paths(g) == 24.0);
    CHECK(g.label(0) == "l1v0");
    CHECK(g.label(9) == "l4v3");
  }

  TEST_CASE("toy-scale synthesis: eleven layers, about 41 vertices, no dead ends") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const LayeredGraph g = synth_pruned(toy_widths(), 0.5, seed);
      CHECK(g.num_layers() == 11);
      CHECK(g.num_vertices() <= 41);
      CHECK(g.num_vertices() >= 25);
      CHECK(validate(g.to_spec()).ok());
      for (int l = 0; l + 1 < g.num_layers(); ++l) {
        for (VertexId v : g.layer(l)) CHECK(g.out_degree(v) > 0);
      }
      CHECK(count_paths(g) >= 1.0);
    }
  }

  TEST_CASE("synthesis is deterministic under the seed") {
    const auto a = synth_pruned(toy_widths(), 0.5, 7).to_spec();
    const auto b = synth_pruned(toy_widths(), 0.5, 7).to_spec();
    const auto c = synth_pruned(toy_widths(), 0.5, 8).to_spec();
    CHECK(a.layers == b.layers);
    CHECK(a.edges == b.edges);
    CHECK((a.edges != c.edges || a.layers != c.layers));
  }

  TEST_CASE("synthesis rejects bad arguments") {
    const std::vector<int> bad{2, 3};
    CHECK(code_of([&] { synth_pruned(bad, 0.5, 0); }) == ErrorCode::kInvalidGraph);
    CHECK(code_of([&] { synth_pruned(toy_widths(), 1.0, 0); }) == ErrorCode::kInvalidGraph);
  }
}

TEST_SUITE("dataset") {
  TEST_CASE("all-paths dataset is the enumeration") {
    const Dataset d = build_dataset(fig1_ptr(), DatasetSpec{});
    CHECK(d.paths == enumerate_paths(fig1()));
  }

  TEST_CASE("sampled dataset draws distinct paths with multiplicities") {
    DatasetSpec spec;
    spec.mode = DatasetSpec::Mode::kSampled;
    spec.count = 6;
    spec.law = MultiplicityLaw::Constant(3);
    spec.seed = 11;
    const Dataset d = build_dataset(fig1_ptr(), spec);
    CHECK(d.paths.size() == 18);
    std::set<Path> distinct(d.paths.begin(), d.paths.end());
    CHECK(distinct.size() == 6);
    for (const auto& p : distinct) CHECK(std::count(d.paths.begin(), d.paths.end(), p) == 3);

    spec.law = MultiplicityLaw::Zipf(1.1, 16);
    const Dataset z1 = build_dataset(fig1_ptr(), spec);
    const Dataset z2 = build_dataset(fig1_ptr(), spec);
    CHECK(z1.paths == z2.paths);
    for (const auto& p : std::set<Path>(z1.paths.begin(), z1.paths.end())) {
      const auto k = std::count(z1.paths.begin(), z1.paths.end(), p);
      CHECK(k >= 1);
      CHECK(k <= 16);
    }

    spec.count = 11;
    CHECK(code_of([&] { build_dataset(fig1_ptr(), spec); }) == ErrorCode::kCountTooLarge);
  }

  TEST_CASE("multiplicity laws round-trip through text") {
    const auto c = MultiplicityLaw::parse("constant:4");
    CHECK(c.kind == MultiplicityLaw::Kind::kConstant);
    CHECK(c.constant == 4);
    CHECK(MultiplicityLaw::parse(c.describe()).describe() == c.describe());
    const auto z = MultiplicityLaw::parse("zipf:1.5:32");
    CHECK(z.kind == MultiplicityLaw::Kind::kZipf);
    CHECK(z.cap == 32);
    CHECK(MultiplicityLaw::parse(z.describe()).describe() == z.describe());
  }
}
