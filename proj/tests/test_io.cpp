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

#include <filesystem>
#include <functional>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "palmdiff/checkpoint.hpp"
#include "palmdiff/error.hpp"
#include "palmdiff/experiment.hpp"
#include "palmdiff/graph_io.hpp"
#include "palmdiff/sampler.hpp"

using namespace palmdiff;
using namespace palmdiff::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "palmdiff_test_io";
  fs::create_directories(dir);
  return dir / name;
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

std::string loss_csv(std::uint64_t seed) {
  const Dataset data = build_dataset(fig1_ptr(), DatasetSpec{});
  const auto shape = std::make_shared<const PalmShape>(fig1());
  TrainConfig cfg;
  cfg.timesteps = 32;
  cfg.epochs = 20;
  cfg.batch_size = 4;
  cfg.seed = seed;
  const TransitionKernel k(shape, NoiseSchedule::cosine(cfg.timesteps));
  Denoiser model(shape, cfg.timesteps, DenoiserConfig{});
  std::ostringstream os;
  write_loss_csv(os, train(model, k, data, cfg));
  return os.str();
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("graph files round-trip and fingerprints track structure") {
    const LayeredGraph g = synth_pruned(toy_widths(), 0.5, 1);
    const fs::path file = scratch("graph.json");
    write_graph(file, g);
    const LayeredGraph back = read_graph(file);
    CHECK(back.to_spec().layers == g.to_spec().layers);
    CHECK(back.to_spec().edges == g.to_spec().edges);
    CHECK(graph_fingerprint(back) == graph_fingerprint(g));
    CHECK(graph_fingerprint(g) != graph_fingerprint(fig1()));
    CHECK(fingerprint_hex(graph_fingerprint(g)).size() == 16);

    CHECK(code_of([] { graph_spec_from_json_text("{\"layers\": 3}"); }) == ErrorCode::kFormat);
    CHECK(code_of([] { graph_spec_from_json_text("not json"); }) == ErrorCode::kFormat);
    CHECK(code_of([] { read_graph(scratch("missing.json")); }) == ErrorCode::kIo);
  }

  TEST_CASE("path lists round-trip and report bad lines") {
    const LayeredGraph& g = fig1();
    std::stringstream ss;
    const auto paths = enumerate_paths(g);
    write_paths(ss, g, paths);
    CHECK(read_paths(ss, g) == paths);

    std::istringstream bad("# comment\nA,B,E,H\nA,B,G,H\n");
    try {
      read_paths(bad, g);
      FAIL("expected invalid-path");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kInvalidPath);
      CHECK(std::string(e.what()).find("3") != std::string::npos);
    }
  }

  TEST_CASE("datasets round-trip and are bound to their graph") {
    DatasetSpec spec;
    spec.mode = DatasetSpec::Mode::kSampled;
    spec.count = 7;
    spec.law = MultiplicityLaw::Zipf(1.2, 8);
    spec.seed = 5;
    const Dataset d = build_dataset(fig1_ptr(), spec);
    const fs::path file = scratch("dataset.txt");
    write_dataset(file, d);
    const Dataset back = read_dataset(file, fig1_ptr());
    CHECK(back.paths == d.paths);
    CHECK(back.spec.seed == 5);
    CHECK(back.spec.law.describe() == spec.law.describe());

    const auto other = std::make_shared<const LayeredGraph>(synth_pruned(toy_widths(), 0.5, 1));
    CHECK(code_of([&] { read_dataset(file, other); }) == ErrorCode::kFingerprintMismatch);
  }

  TEST_CASE("identical seeds give byte-identical dataset files") {
    DatasetSpec spec;
    spec.mode = DatasetSpec::Mode::kSampled;
    spec.count = 40;
    spec.seed = 12;
    const auto g = std::make_shared<const LayeredGraph>(synth_pruned(toy_widths(), 0.5, 2));
    write_dataset(scratch("d1.txt"), build_dataset(g, spec));
    write_dataset(scratch("d2.txt"), build_dataset(g, spec));
    CHECK(read_text_file(scratch("d1.txt")) == read_text_file(scratch("d2.txt")));
    spec.seed = 13;
    write_dataset(scratch("d3.txt"), build_dataset(g, spec));
    CHECK(read_text_file(scratch("d1.txt")) != read_text_file(scratch("d3.txt")));
  }

  TEST_CASE("identical seeds give byte-identical loss curves") {
    const std::string a = loss_csv(3), b = loss_csv(3);
    CHECK(a == b);
    CHECK(a != loss_csv(4));
    CHECK(a.rfind("epoch,", 0) == 0);
  }

  TEST_CASE("identical seeds give byte-identical sample files") {
    const LayeredGraph& g = fig1();
    const auto shape = std::make_shared<const PalmShape>(g);
    const TransitionKernel k(shape, NoiseSchedule::cosine(32));
    const Denoiser model(shape, 32, DenoiserConfig{});
    auto dump = [&](std::uint64_t seed) {
      const auto paths = sample_unguided(model, k, g, 300, seed);
      return samples_to_text(g, paths, "{\"seed\":" + std::to_string(seed) + "}", "samples=300");
    };
    const std::string a = dump(8);
    CHECK(a == dump(8));
    CHECK(a != dump(9));
    std::istringstream is(a);
    CHECK(read_paths(is, g).size() == 300);
    CHECK(a.rfind("# palmdiff-samples format_version=1\n", 0) == 0);
  }

  TEST_CASE("reward files round-trip") {
    const LayeredGraph& g = fig1();
    const auto shape = std::make_shared<const PalmShape>(g);
    const RewardSpec r = make_reward_spec(
        g, shape, {{id(g, "A"), id(g, "C"), 1.0}, {id(g, "G"), id(g, "H"), 0.5}}, "two");
    CHECK(r.max_reward == 1.5);
    const fs::path file = scratch("reward.json");
    write_reward(file, g, r);
    const RewardSpec back = read_reward(file, g, shape);
    CHECK(back.label == "two");
    CHECK(back.max_reward == 1.5);
    CHECK(back.edges == r.edges);
    for (std::size_t i = 0; i < r.u.values().size(); ++i) CHECK(back.u.values()[i] == r.u.values()[i]);

    write_text_file(file, R"({"format_version":1,"label":"x","edges":[["A","H",1.0]]})");
    CHECK(code_of([&] { read_reward(file, g, shape); }) == ErrorCode::kUnknownEdge);
  }

  TEST_CASE("checkpoints round-trip exactly, optimizer state included") {
    const Dataset data = build_dataset(fig1_ptr(), DatasetSpec{});
    TrainConfig cfg;
    cfg.timesteps = 16;
    cfg.epochs = 3;
    cfg.batch_size = 5;
    DenoiserConfig mc;
    mc.hidden = 8;
    mc.blocks = 1;
    mc.time_dim = 4;
    Checkpoint c = make_untrained(fig1(), cfg, mc);
    train(*c.model, *c.kernel, data, cfg);
    const fs::path file = scratch("ckpt.json");
    save_checkpoint(file, fig1(), c);
    const Checkpoint back = load_checkpoint(file, fig1());
    CHECK(back.train.epochs == 3);
    CHECK(back.model->config().hidden == 8);
    CHECK(back.model->params().step == c.model->params().step);
    for (std::size_t i = 0; i < c.model->params().tensors.size(); ++i) {
      const auto& x = c.model->params().tensors[i];
      const auto& y = back.model->params().tensors[i];
      CHECK(x.value == y.value);
      CHECK(x.first_moment == y.first_moment);
      CHECK(x.second_moment == y.second_moment);
    }
    CHECK(checkpoint_to_text(fig1(), back) == read_text_file(file));

    const LayeredGraph other = synth_pruned(toy_widths(), 0.5, 1);
    CHECK(code_of([&] { load_checkpoint(file, other); }) == ErrorCode::kFingerprintMismatch);
    write_text_file(scratch("junk.json"), "{\"kind\":\"other\"}");
    CHECK(code_of([&] { load_checkpoint(scratch("junk.json"), fig1()); }) == ErrorCode::kFormat);
  }

  TEST_CASE("sweep output is deterministic apart from timing") {
    TrainConfig cfg;
    cfg.timesteps = 16;
    DenoiserConfig mc;
    mc.hidden = 8;
    const Checkpoint c = make_untrained(fig1(), cfg, mc);
    const auto shape = c.shape;
    const std::vector<RewardSpec> rewards{single_edge_reward(fig1(), shape, 0.2)};
    SweepConfig sc;
    sc.lambdas = {0.0, 10.0};
    sc.samples = 256;
    sc.target_samples = 1024;
    sc.workers = 2;
    sc.seed = 4;
    auto run = [&] {
      std::vector<SweepRecord> r = run_sweep(c, fig1(), rewards, sc);
      for (auto& x : r) x.seconds = 0.0;
      std::ostringstream os;
      write_sweep_csv(os, r);
      return os.str();
    };
    const std::string a = run();
    CHECK(a == run());
    std::istringstream is(a);
    std::string line;
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 3);
  }
}
