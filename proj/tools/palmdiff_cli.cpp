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

// palmdiff command-line driver. Exit codes: 0 success, 1 validation failure,
// 2 I/O or configuration error. Relative output paths are placed under
// $PALMDIFF_OUT_DIR when it is set.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "palmdiff/checkpoint.hpp"
#include "palmdiff/dataset.hpp"
#include "palmdiff/error.hpp"
#include "palmdiff/experiment.hpp"
#include "palmdiff/graph.hpp"
#include "palmdiff/graph_io.hpp"
#include "palmdiff/guidance.hpp"
#include "palmdiff/metrics.hpp"
#include "palmdiff/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace palmdiff;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitConfig = 2;

// Failure that maps straight to an exit code.
struct ExitRequest {
  int code;
};

fs::path output_path(const std::string& file) {
  fs::path p(file);
  if (p.is_relative()) {
    if (const char* dir = std::getenv("PALMDIFF_OUT_DIR"); dir && *dir) return fs::path(dir) / p;
  }
  return p;
}

std::shared_ptr<const LayeredGraph> load_graph(const std::string& file) {
  return std::make_shared<const LayeredGraph>(read_graph(file));
}

// ---------------------------------------------------------------------------

struct GraphGenArgs {
  int layers = 11;
  int width = 4;
  double prune = 0.5;
  std::uint64_t seed = 0;
  std::string out = "graph.json";
};

void add_graph_commands(CLI::App& app) {
  auto* graph = app.add_subcommand("graph", "Synthesise, validate or enumerate layered graphs");
  graph->require_subcommand(1);

  auto gen_args = std::make_shared<GraphGenArgs>();
  auto* gen = graph->add_subcommand("gen", "Write a pruned layered graph (first layer has 1 vertex)");
  gen->add_option("--layers", gen_args->layers, "Number of layers")->capture_default_str();
  gen->add_option("--width", gen_args->width, "Vertices per layer after the first")->capture_default_str();
  gen->add_option("--prune", gen_args->prune, "Fraction of edges removed before repair")->capture_default_str();
  gen->add_option("--seed", gen_args->seed, "Random seed")->capture_default_str();
  gen->add_option("--out", gen_args->out, "Output graph file")->capture_default_str();
  gen->callback([gen_args] {
    if (gen_args->layers < 2 || gen_args->width < 1) {
      throw Error(ErrorCode::kInvalidArgument, "need --layers >= 2 and --width >= 1");
    }
    std::vector<int> widths(gen_args->layers, gen_args->width);
    widths[0] = 1;
    const LayeredGraph g = gen_args->prune > 0.0 ? synth_pruned(widths, gen_args->prune, gen_args->seed)
                                                 : layerwise_full(widths);
    const fs::path out = output_path(gen_args->out);
    write_graph(out, g);
    std::cout << "wrote " << out.string() << ": " << g.num_layers() << " layers, "
              << g.num_vertices() << " vertices, " << g.num_edges() << " edges, "
              << count_paths(g) << " paths\n";
  });

  auto file = std::make_shared<std::string>();
  auto* validate_cmd = graph->add_subcommand("validate", "Check the layered-graph conditions");
  validate_cmd->add_option("file", *file, "Graph file")->required();
  validate_cmd->callback([file] {
    const ValidationReport report = validate(read_graph_spec(*file));
    if (report.ok()) {
      std::cout << "ok\n";
      return;
    }
    for (const auto& v : report.violations) {
      std::cout << to_string(v.kind) << ": " << v.detail << '\n';
    }
    throw ExitRequest{kExitValidation};
  });

  auto enum_file = std::make_shared<std::string>();
  auto enum_out = std::make_shared<std::string>();
  auto cap = std::make_shared<std::size_t>(1'000'000);
  auto* enumerate = graph->add_subcommand("enumerate", "List every path, one per line");
  enumerate->add_option("file", *enum_file, "Graph file")->required();
  enumerate->add_option("--cap", *cap, "Fail when there are more paths than this")->capture_default_str();
  enumerate->add_option("--out", *enum_out, "Output file (default: stdout)");
  enumerate->callback([enum_file, enum_out, cap] {
    const LayeredGraph g = read_graph(*enum_file);
    const auto paths = enumerate_paths(g, *cap);
    std::ostringstream os;
    write_paths(os, g, paths);
    if (enum_out->empty()) {
      std::cout << os.str();
    } else {
      write_text_file(output_path(*enum_out), os.str());
      std::cerr << paths.size() << " paths\n";
    }
  });
}

// ---------------------------------------------------------------------------

struct DatasetArgs {
  std::string graph;
  std::string mode = "all";
  std::size_t count = 0;
  std::string law = "constant:1";
  std::uint64_t seed = 0;
  double validation_split = 0.2;
  std::string out = "dataset.txt";
};

void add_dataset_commands(CLI::App& app) {
  auto* dataset = app.add_subcommand("dataset", "Build path datasets");
  dataset->require_subcommand(1);
  auto a = std::make_shared<DatasetArgs>();
  auto* build = dataset->add_subcommand("build", "Enumerate or sample paths into a dataset file");
  build->add_option("--graph", a->graph, "Graph file")->required();
  build->add_option("--mode", a->mode, "all | sampled")->check(CLI::IsMember({"all", "sampled"}))->capture_default_str();
  build->add_option("--count", a->count, "Distinct paths to sample (sampled mode)");
  build->add_option("--law", a->law, "Copies per sampled path: constant:K or zipf:S:CAP")->capture_default_str();
  build->add_option("--seed", a->seed, "Random seed")->capture_default_str();
  build->add_option("--validation-split", a->validation_split, "Held-out fraction recorded in the header")->capture_default_str();
  build->add_option("--out", a->out, "Output dataset file")->capture_default_str();
  build->callback([a] {
    auto g = load_graph(a->graph);
    DatasetSpec spec;
    spec.mode = a->mode == "all" ? DatasetSpec::Mode::kAll : DatasetSpec::Mode::kSampled;
    spec.count = a->count;
    spec.law = MultiplicityLaw::parse(a->law);
    spec.seed = a->seed;
    spec.validation_split = a->validation_split;
    const Dataset d = build_dataset(g, spec);
    const fs::path out = output_path(a->out);
    write_dataset(out, d);
    std::cout << "wrote " << out.string() << ": " << d.paths.size() << " paths\n";
  });
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string graph, dataset;
  std::string checkpoint = "checkpoint.json";
  std::string loss_csv = "loss.csv";
  TrainConfig train;
  DenoiserConfig model;
};

void add_train_command(CLI::App& app) {
  auto a = std::make_shared<TrainArgs>();
  auto* cmd = app.add_subcommand(
      "train",
      "Train the denoiser. The loss CSV has columns epoch,steps,train_loss,train_ce,val_loss,val_ce "
      "(val_* are nan with an empty split)");
  cmd->add_option("--graph", a->graph, "Graph file")->required();
  cmd->add_option("--dataset", a->dataset, "Dataset file")->required();
  cmd->add_option("--checkpoint", a->checkpoint, "Output checkpoint")->capture_default_str();
  cmd->add_option("--loss-csv", a->loss_csv, "Output loss curve")->capture_default_str();
  cmd->add_option("--timesteps", a->train.timesteps, "Diffusion steps T")->capture_default_str();
  cmd->add_option("--schedule-offset", a->train.schedule_offset, "Cosine schedule offset s")->capture_default_str();
  cmd->add_option("--gamma", a->train.gamma, "Weight of the variational term")->capture_default_str();
  cmd->add_option("--epochs", a->train.epochs)->capture_default_str();
  cmd->add_option("--batch-size", a->train.batch_size)->capture_default_str();
  cmd->add_option("--lr", a->train.learning_rate, "AdamW learning rate")->capture_default_str();
  cmd->add_option("--weight-decay", a->train.weight_decay)->capture_default_str();
  cmd->add_option("--validation-split", a->train.validation_split)->capture_default_str();
  cmd->add_option("--max-steps", a->train.max_steps, "Stop after this many steps (0: no limit)")->capture_default_str();
  cmd->add_option("--seed", a->train.seed)->capture_default_str();
  cmd->add_option("--hidden", a->model.hidden)->capture_default_str();
  cmd->add_option("--blocks", a->model.blocks)->capture_default_str();
  cmd->add_option("--time-dim", a->model.time_dim)->capture_default_str();
  cmd->add_option("--init-seed", a->model.seed, "Parameter initialisation seed")->capture_default_str();
  cmd->callback([a] {
    auto g = load_graph(a->graph);
    const Dataset d = read_dataset(a->dataset, g);
    Checkpoint ckpt = make_untrained(*g, a->train, a->model);
    const int every = std::max(1, a->train.epochs / 20);
    const TrainReport report = train(*ckpt.model, *ckpt.kernel, d, a->train, [&](const EpochRecord& r) {
      if (r.epoch % every == 0 || r.epoch + 1 == a->train.epochs) {
        std::cerr << "epoch " << r.epoch << " steps " << r.steps << " loss " << r.train_loss
                  << " val " << r.val_loss << '\n';
      }
    });
    std::ostringstream csv;
    write_loss_csv(csv, report);
    write_text_file(output_path(a->loss_csv), csv.str());
    save_checkpoint(output_path(a->checkpoint), *g, ckpt);
    std::cout << "trained on " << report.train_size << " paths (" << report.validation_size
              << " held out); wrote " << output_path(a->checkpoint).string() << '\n';
  });
}

// ---------------------------------------------------------------------------

struct SampleArgs {
  std::string graph, checkpoint, reward;
  double lambda = 0.0;
  std::size_t n = 8192;
  std::uint64_t seed = 0;
  std::string mode = "d3pm-posterior";
  std::size_t batch_size = 256;
  std::string out = "samples.txt";
};

void add_sample_command(CLI::App& app) {
  auto a = std::make_shared<SampleArgs>();
  auto* cmd = app.add_subcommand("sample", "Draw paths, optionally reward-guided");
  cmd->add_option("--graph", a->graph, "Graph file")->required();
  cmd->add_option("--checkpoint", a->checkpoint, "Checkpoint file")->required();
  cmd->add_option("--reward", a->reward, "Reward file (absent: unguided)");
  cmd->add_option("--lambda", a->lambda, "Guidance scale")->capture_default_str();
  cmd->add_option("-n,--samples", a->n, "Number of samples")->capture_default_str();
  cmd->add_option("--seed", a->seed)->capture_default_str();
  cmd->add_option("--mode", a->mode, "d3pm-posterior | paper-literal")->capture_default_str();
  cmd->add_option("--batch-size", a->batch_size)->capture_default_str();
  cmd->add_option("--out", a->out, "Output sample file")->capture_default_str();
  cmd->callback([a] {
    auto g = load_graph(a->graph);
    const Checkpoint ckpt = load_checkpoint(a->checkpoint, *g);
    const GuidanceConfig gc{a->lambda, parse_posterior_mode(a->mode)};
    std::vector<Path> paths;
    std::ostringstream summary;
    summary.precision(10);
    if (!a->reward.empty()) {
      const RewardSpec reward = read_reward(a->reward, *g, ckpt.shape);
      const GuidedSamples s = guided_sample(*ckpt.model, *ckpt.kernel, *g, reward.u, gc, a->n,
                                            a->seed, a->batch_size);
      paths = s.paths;
      double mean = 0.0;
      for (double r : s.rewards) mean += r;
      mean /= static_cast<double>(std::max<std::size_t>(1, s.rewards.size()));
      summary << "mean_reward=" << mean << " max_reward=" << reward.max_reward << '\n';
    } else {
      SamplerOptions options;
      options.mode = gc.mode;
      options.batch_size = a->batch_size;
      paths = sample_paths(*ckpt.model, *ckpt.kernel, *g, a->n, a->seed, options);
    }
    summary << "samples=" << paths.size() << " valid_rate=" << valid_rate(*g, paths) << '\n';
    const json config = {{"graph", a->graph}, {"checkpoint", a->checkpoint}, {"reward", a->reward},
                         {"lambda", a->lambda}, {"samples", a->n}, {"seed", a->seed},
                         {"mode", a->mode}};
    write_text_file(output_path(a->out), samples_to_text(*g, paths, config.dump(), summary.str()));
    std::cout << summary.str();
  });
}

// ---------------------------------------------------------------------------

struct RewardArgs {
  std::string graph;
  std::string kind = "single-edge";
  double target_fraction = 0.25;
  int k = 1;
  std::uint64_t seed = 0;
  std::vector<std::string> edges;
  std::string label;
  std::string out = "reward.json";
};

void add_reward_commands(CLI::App& app) {
  auto* reward = app.add_subcommand("reward", "Build reward files");
  reward->require_subcommand(1);
  auto a = std::make_shared<RewardArgs>();
  auto* make = reward->add_subcommand("make", "Write a binary edge reward");
  make->add_option("--graph", a->graph, "Graph file")->required();
  make->add_option("--kind", a->kind, "single-edge | path-edges | edges")
      ->check(CLI::IsMember({"single-edge", "path-edges", "edges"}))->capture_default_str();
  make->add_option("--target-fraction", a->target_fraction,
                   "single-edge: pick the edge used by this fraction of paths")->capture_default_str();
  make->add_option("--k", a->k, "path-edges: rewarded edges on one random path")->capture_default_str();
  make->add_option("--seed", a->seed)->capture_default_str();
  make->add_option("--edge", a->edges, "edges: SRC,DST[,VALUE] (repeatable)");
  make->add_option("--label", a->label, "Label override");
  make->add_option("--out", a->out, "Output reward file")->capture_default_str();
  make->callback([a] {
    auto g = load_graph(a->graph);
    auto shape = std::make_shared<const PalmShape>(*g);
    RewardSpec spec = [&] {
      if (a->kind == "single-edge") return single_edge_reward(*g, shape, a->target_fraction);
      if (a->kind == "path-edges") return path_edges_reward(*g, shape, a->k, a->seed);
      std::vector<EdgeReward> edges;
      for (const auto& e : a->edges) {
        std::vector<std::string> parts;
        std::stringstream ss(e);
        for (std::string f; std::getline(ss, f, ',');) parts.push_back(f);
        if (parts.size() < 2 || parts.size() > 3) throw Error(ErrorCode::kInvalidArgument, "bad --edge " + e);
        const auto src = g->find(parts[0]), dst = g->find(parts[1]);
        if (!src || !dst) throw Error(ErrorCode::kUnknownEdge, e);
        edges.emplace_back(*src, *dst, parts.size() == 3 ? std::stod(parts[2]) : 1.0);
      }
      return make_reward_spec(*g, shape, std::move(edges), "edges");
    }();
    if (!a->label.empty()) spec.label = a->label;
    write_reward(output_path(a->out), *g, spec);
    std::cout << "wrote " << output_path(a->out).string() << ": " << spec.label
              << ", R_max = " << spec.max_reward << '\n';
  });
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  std::string graph, checkpoint;
  std::vector<std::string> rewards;
  SweepConfig sweep;
  std::string mode = "d3pm-posterior";
  std::string out_dir = "sweep";
};

void add_sweep_command(CLI::App& app) {
  auto a = std::make_shared<SweepArgs>();
  auto* cmd = app.add_subcommand(
      "sweep",
      "Guided sampling over a lambda grid with metrics against the max-reward target.\n"
      "sweep.csv columns: " + sweep_csv_header() +
          "\nplots/<metric>.csv: lambda followed by one column per reward instance");
  cmd->add_option("--graph", a->graph, "Graph file")->required();
  cmd->add_option("--checkpoint", a->checkpoint, "Checkpoint file")->required();
  cmd->add_option("--reward", a->rewards, "Reward file (repeatable)")->required();
  cmd->add_option("--lambdas", a->sweep.lambdas, "Guidance scales")->capture_default_str();
  cmd->add_option("--samples", a->sweep.samples, "Guided samples per cell")->capture_default_str();
  cmd->add_option("--target-samples", a->sweep.target_samples, "Unguided draws for the target")->capture_default_str();
  cmd->add_flag("--exact-target", a->sweep.exact_target, "Condition the enumerated uniform law instead");
  cmd->add_option("--mode", a->mode, "d3pm-posterior | paper-literal")->capture_default_str();
  cmd->add_option("--seed", a->sweep.seed)->capture_default_str();
  cmd->add_option("--workers", a->sweep.workers, "Worker threads (0: all cores)")->capture_default_str();
  cmd->add_option("--out-dir", a->out_dir, "Output directory")->capture_default_str();
  cmd->callback([a] {
    auto g = load_graph(a->graph);
    const Checkpoint ckpt = load_checkpoint(a->checkpoint, *g);
    a->sweep.mode = parse_posterior_mode(a->mode);
    std::vector<RewardSpec> rewards;
    for (const auto& r : a->rewards) rewards.push_back(read_reward(r, *g, ckpt.shape));
    const auto records = run_sweep(ckpt, *g, rewards, a->sweep, [](const SweepRecord& r) {
      std::cerr << r.instance << " lambda=" << r.lambda << " reward=" << r.mean_reward
                << (r.target_ok ? "" : " (empty target)") << '\n';
    });
    const fs::path dir = output_path(a->out_dir);
    json config = {{"graph", a->graph}, {"checkpoint", a->checkpoint}, {"rewards", a->rewards},
                   {"sweep", a->sweep}};
    std::ostringstream csv;
    csv << "# config=" << config.dump() << '\n';
    write_sweep_csv(csv, records);
    write_text_file(dir / "sweep.csv", csv.str());
    write_plot_files(dir, records);
    std::cout << "wrote " << (dir / "sweep.csv").string() << '\n';
  });
}

// ---------------------------------------------------------------------------

void add_metrics_command(CLI::App& app) {
  auto graph = std::make_shared<std::string>();
  auto target = std::make_shared<std::string>();
  auto generated = std::make_shared<std::string>();
  auto* cmd = app.add_subcommand("metrics", "Compare two path files; prints " + MetricsReport::csv_header());
  cmd->add_option("--graph", *graph, "Graph file")->required();
  cmd->add_option("--target", *target, "Target path file")->required();
  cmd->add_option("--generated", *generated, "Generated path file")->required();
  cmd->callback([graph, target, generated] {
    const LayeredGraph g = read_graph(*graph);
    std::istringstream t(read_text_file(*target)), s(read_text_file(*generated));
    const auto tp = read_paths(t, g), gp = read_paths(s, g);
    if (tp.empty()) throw Error(ErrorCode::kEmptySamples, "empty target file");
    const MetricsReport m = evaluate_metrics(g, EmpiricalPathDistribution::from_samples(tp), gp);
    std::cout << MetricsReport::csv_header() << '\n' << m.csv_row() << '\n';
  });
}

void add_run_command(CLI::App& app) {
  auto config = std::make_shared<std::string>();
  auto* cmd = app.add_subcommand(
      "run", "Full pipeline (graph, dataset, train, rewards, sweep) from one JSON config");
  cmd->alias("pipeline");
  cmd->add_option("config", *config, "Config file")->required();
  cmd->callback([config] {
    json cfg;
    try {
      cfg = json::parse(read_text_file(*config));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kFormat, std::string("config: ") + e.what());
    }
    if (const char* dir = std::getenv("PALMDIFF_OUT_DIR"); dir && *dir) cfg["output_dir"] = dir;
    const PipelineResult r = run_pipeline(cfg, std::cerr);
    std::cout << "wrote " << r.output_dir.string() << '\n';
  });
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kIo:
    case ErrorCode::kFormat:
    case ErrorCode::kInvalidArgument:
      return kExitConfig;
    default:
      return kExitValidation;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"palmdiff: discrete diffusion over paths of layered graphs"};
  app.require_subcommand(1);
  add_graph_commands(app);
  add_dataset_commands(app);
  add_train_command(app);
  add_sample_command(app);
  add_reward_commands(app);
  add_sweep_command(app);
  add_metrics_command(app);
  add_run_command(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  } catch (const ExitRequest& r) {
    return r.code;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return 0;
}
