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

#include "palmdiff/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "palmdiff/dataset.hpp"
#include "palmdiff/error.hpp"
#include "palmdiff/graph_io.hpp"
#include "palmdiff/train.hpp"

namespace palmdiff {

using nlohmann::json;

void to_json(json& j, const SweepConfig& c) {
  j = json{{"lambdas", c.lambdas},
           {"samples", c.samples},
           {"target_samples", c.target_samples},
           {"exact_target", c.exact_target},
           {"mode", std::string(to_string(c.mode))},
           {"seed", c.seed},
           {"workers", c.workers},
           {"batch_size", c.batch_size}};
}

void from_json(const json& j, SweepConfig& c) {
  c.lambdas = j.value("lambdas", c.lambdas);
  c.samples = j.value("samples", c.samples);
  c.target_samples = j.value("target_samples", c.target_samples);
  c.exact_target = j.value("exact_target", c.exact_target);
  if (j.contains("mode")) c.mode = parse_posterior_mode(j.at("mode").get<std::string>());
  c.seed = j.value("seed", c.seed);
  c.workers = j.value("workers", c.workers);
  c.batch_size = j.value("batch_size", c.batch_size);
}

namespace {

constexpr std::uint64_t kTargetStream = 0x746172676574ULL;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void nan_metrics(MetricsReport& m) {
  m.kl = m.kl_epsilon = m.l1 = m.tv = m.sfd = kNaN;
  m.isl_l1 = m.isl_kl = m.isl_tv = m.isl_sf = m.flgd = kNaN;
}

// Runs f(0..n-1) on `workers` threads; rethrows the first failure.
template <typename F>
void parallel_for(std::size_t n, int workers, F&& f) {
  std::size_t threads = workers > 0 ? static_cast<std::size_t>(workers)
                                    : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::vector<SweepRecord> run_sweep(const Checkpoint& ckpt, const LayeredGraph& g,
                                   std::span<const RewardSpec> instances, const SweepConfig& cfg,
                                   const SweepProgress& progress) {
  if (cfg.lambdas.empty()) throw Error(ErrorCode::kInvalidArgument, "empty lambda grid");
  if (instances.empty()) throw Error(ErrorCode::kInvalidArgument, "no reward instances");
  for (double lambda : cfg.lambdas) {
    if (!std::isfinite(lambda) || lambda < 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "lambda values must be finite and >= 0");
    }
  }

  std::vector<std::optional<TargetDistribution>> targets(instances.size());
  parallel_for(instances.size(), cfg.workers, [&](std::size_t i) {
    try {
      targets[i] = cfg.exact_target
                       ? exact_target_distribution(g, instances[i])
                       : target_distribution(*ckpt.model, *ckpt.kernel, g, instances[i],
                                             cfg.target_samples,
                                             derive_seed(cfg.seed, {kTargetStream, i}),
                                             cfg.batch_size);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kEmptyConditional) throw;
    }
  });

  const std::size_t cells = instances.size() * cfg.lambdas.size();
  std::vector<SweepRecord> records(cells);
  std::mutex progress_mutex;
  parallel_for(cells, cfg.workers, [&](std::size_t cell) {
    const std::size_t i = cell / cfg.lambdas.size();
    const std::size_t k = cell % cfg.lambdas.size();
    const auto start = std::chrono::steady_clock::now();
    SweepRecord& r = records[cell];
    r.instance = instances[i].label;
    r.lambda = cfg.lambdas[k];
    r.max_reward = instances[i].max_reward;
    GuidanceConfig gc{cfg.lambdas[k], cfg.mode};
    const GuidedSamples s = guided_sample(*ckpt.model, *ckpt.kernel, g, instances[i].u, gc,
                                          cfg.samples, derive_seed(cfg.seed, {i, k}),
                                          cfg.batch_size);
    const double n = static_cast<double>(s.rewards.size());
    double sum = 0.0, sq = 0.0;
    for (double x : s.rewards) sum += x;
    r.mean_reward = sum / n;
    for (double x : s.rewards) sq += (x - r.mean_reward) * (x - r.mean_reward);
    r.std_reward = n > 1 ? std::sqrt(sq / (n - 1)) : 0.0;
    r.stderr_reward = r.std_reward / std::sqrt(n);
    if (targets[i]) {
      r.target_retention = targets[i]->retention;
      r.metrics = evaluate_metrics(g, targets[i]->distribution, s.paths);
    } else {
      r.target_ok = false;
      r.metrics.valid_rate = valid_rate(g, s.paths);
      r.metrics.generated_count = s.paths.size();
      nan_metrics(r.metrics);
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(r);
    }
  });
  return records;
}

std::string sweep_csv_header() {
  return "instance,lambda,max_reward,mean_reward,std_reward,stderr_reward,target_ok,"
         "target_retention," + MetricsReport::csv_header() + ",seconds";
}

void write_sweep_csv(std::ostream& os, std::span<const SweepRecord> records) {
  os << sweep_csv_header() << '\n';
  std::ostringstream line;
  for (const auto& r : records) {
    line.str("");
    line.precision(10);
    line << r.instance << ',' << r.lambda << ',' << r.max_reward << ',' << r.mean_reward << ','
         << r.std_reward << ',' << r.stderr_reward << ',' << (r.target_ok ? 1 : 0) << ','
         << r.target_retention << ',' << r.metrics.csv_row() << ',' << r.seconds << '\n';
    os << line.str();
  }
}

namespace {

double metric_value(const SweepRecord& r, const std::string& metric) {
  const MetricsReport& m = r.metrics;
  static const std::map<std::string, double MetricsReport::*> fields = {
      {"valid_rate", &MetricsReport::valid_rate}, {"kl", &MetricsReport::kl},
      {"l1", &MetricsReport::l1},                 {"tv", &MetricsReport::tv},
      {"sfd", &MetricsReport::sfd},               {"isl_l1", &MetricsReport::isl_l1},
      {"isl_kl", &MetricsReport::isl_kl},         {"isl_tv", &MetricsReport::isl_tv},
      {"isl_sf", &MetricsReport::isl_sf},         {"flgd", &MetricsReport::flgd}};
  if (metric == "mean_reward") return r.mean_reward;
  if (metric == "normalized_reward") return r.max_reward > 0 ? r.mean_reward / r.max_reward : kNaN;
  const auto it = fields.find(metric);
  if (it == fields.end()) throw Error(ErrorCode::kInvalidArgument, "unknown metric " + metric);
  return m.*(it->second);
}

struct Series {
  std::vector<std::string> instances;
  std::vector<double> lambdas;
  std::map<std::pair<std::string, double>, double> values;
};

Series collect(std::span<const SweepRecord> records, const std::string& metric) {
  Series s;
  for (const auto& r : records) {
    if (std::find(s.instances.begin(), s.instances.end(), r.instance) == s.instances.end()) {
      s.instances.push_back(r.instance);
    }
    if (std::find(s.lambdas.begin(), s.lambdas.end(), r.lambda) == s.lambdas.end()) {
      s.lambdas.push_back(r.lambda);
    }
    s.values[{r.instance, r.lambda}] = metric_value(r, metric);
  }
  std::sort(s.lambdas.begin(), s.lambdas.end());
  return s;
}

}  // namespace

std::vector<std::string> plot_metrics() {
  return {"mean_reward", "normalized_reward", "valid_rate", "kl", "l1", "tv",
          "sfd", "isl_l1", "isl_kl", "isl_tv", "isl_sf", "flgd"};
}

void write_plot_table(std::ostream& os, std::span<const SweepRecord> records,
                      const std::string& metric) {
  const Series s = collect(records, metric);
  os << "lambda";
  for (const auto& name : s.instances) os << ',' << name;
  os << '\n';
  const auto old = os.precision(10);
  for (double lambda : s.lambdas) {
    os << lambda;
    for (const auto& name : s.instances) {
      const auto it = s.values.find({name, lambda});
      os << ',';
      if (it != s.values.end()) os << it->second;
    }
    os << '\n';
  }
  os.precision(old);
}

std::string svg_line_chart(std::span<const SweepRecord> records, const std::string& metric) {
  const Series s = collect(records, metric);
  constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 170, kTop = 30, kBottom = 50;
  const double x_max = std::log10(1.0 + s.lambdas.back());
  double y_min = std::numeric_limits<double>::infinity(), y_max = -y_min;
  for (const auto& [key, v] : s.values) {
    if (!std::isfinite(v)) continue;
    y_min = std::min(y_min, v);
    y_max = std::max(y_max, v);
  }
  if (!std::isfinite(y_min)) y_min = 0.0, y_max = 1.0;
  if (y_max - y_min < 1e-12) y_min -= 0.5, y_max += 0.5;
  const auto px = [&](double lambda) {
    const double x = x_max > 0 ? std::log10(1.0 + lambda) / x_max : 0.5;
    return kLeft + x * (kW - kLeft - kRight);
  };
  const auto py = [&](double v) {
    return kH - kBottom - (v - y_min) / (y_max - y_min) * (kH - kTop - kBottom);
  };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                 "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
  std::ostringstream os;
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kLeft << "\" y=\"18\">" << metric << " vs lambda</text>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight
     << "\" y2=\"" << kH - kBottom << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
     << kH - kBottom << "\" stroke=\"black\"/>\n";
  for (double lambda : s.lambdas) {
    os << "<text x=\"" << px(lambda) << "\" y=\"" << kH - kBottom + 18
       << "\" text-anchor=\"middle\">" << lambda << "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double v = y_min + (y_max - y_min) * k / 4.0;
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << v
       << "</text>\n";
  }
  os << "<text x=\"" << (kLeft + kW - kRight) / 2 << "\" y=\"" << kH - 10
     << "\" text-anchor=\"middle\">lambda (log(1 + x) axis)</text>\n";
  for (std::size_t i = 0; i < s.instances.size(); ++i) {
    const char* color = colors[i % 8];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (double lambda : s.lambdas) {
      const auto it = s.values.find({s.instances[i], lambda});
      if (it == s.values.end() || !std::isfinite(it->second)) continue;
      os << px(lambda) << ',' << py(it->second) << ' ';
    }
    os << "\"/>\n";
    os << "<text x=\"" << kW - kRight + 10 << "\" y=\"" << kTop + 16 * (i + 1) << "\" fill=\""
       << color << "\">" << s.instances[i] << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_plot_files(const std::filesystem::path& dir, std::span<const SweepRecord> records) {
  for (const auto& metric : plot_metrics()) {
    std::ostringstream table;
    write_plot_table(table, records, metric);
    write_text_file(dir / "plots" / (metric + ".csv"), table.str());
    write_text_file(dir / "plots" / (metric + ".svg"), svg_line_chart(records, metric));
  }
}

// ---------------------------------------------------------------------------

namespace {

std::shared_ptr<const LayeredGraph> pipeline_graph(json& cfg, const std::filesystem::path& out,
                                                   std::ostream& log) {
  json& gc = cfg["graph"];
  LayeredGraph g = [&] {
    if (gc.contains("file")) return read_graph(gc.at("file").get<std::string>());
    const int layers = gc.value("layers", 11);
    const int width = gc.value("width", 4);
    const double prune = gc.value("prune", 0.5);
    const std::uint64_t seed = gc.value("seed", cfg.value("seed", std::uint64_t{0}));
    gc["layers"] = layers;
    gc["width"] = width;
    gc["prune"] = prune;
    gc["seed"] = seed;
    std::vector<int> widths(static_cast<std::size_t>(layers), width);
    widths[0] = 1;
    return prune > 0.0 ? synth_pruned(widths, prune, seed) : layerwise_full(widths);
  }();
  write_graph(out / "graph.json", g);
  log << "graph: " << g.num_layers() << " layers, " << g.num_vertices() << " vertices, "
      << g.num_edges() << " edges, " << count_paths(g) << " paths\n";
  return std::make_shared<const LayeredGraph>(std::move(g));
}

Dataset pipeline_dataset(json& cfg, std::shared_ptr<const LayeredGraph> g,
                         const std::filesystem::path& out, std::ostream& log) {
  json& dc = cfg["dataset"];
  Dataset d;
  if (dc.contains("file")) {
    d = read_dataset(dc.at("file").get<std::string>(), g);
  } else {
    DatasetSpec spec;
    const std::string mode = dc.value("mode", std::string("all"));
    spec.mode = mode == "all" ? DatasetSpec::Mode::kAll : DatasetSpec::Mode::kSampled;
    spec.count = dc.value("count", std::size_t{0});
    spec.law = MultiplicityLaw::parse(dc.value("law", std::string("constant:1")));
    spec.seed = dc.value("seed", cfg.value("seed", std::uint64_t{0}));
    spec.validation_split = cfg["train"].value("validation_split", 0.2);
    dc["mode"] = mode;
    dc["count"] = spec.count;
    dc["law"] = spec.law.describe();
    dc["seed"] = spec.seed;
    d = build_dataset(g, spec);
  }
  write_dataset(out / "dataset.txt", d);
  log << "dataset: " << d.paths.size() << " paths\n";
  return d;
}

std::vector<RewardSpec> pipeline_rewards(json& cfg, const LayeredGraph& g,
                                         std::shared_ptr<const PalmShape> shape,
                                         const std::filesystem::path& out) {
  if (!cfg.contains("rewards")) {
    cfg["rewards"] = json::array({json{{"kind", "single-edge"}, {"target_fraction", 0.25}}});
  }
  std::vector<RewardSpec> rewards;
  for (json& rc : cfg["rewards"]) {
    if (rc.contains("file")) {
      rewards.push_back(read_reward(rc.at("file").get<std::string>(), g, shape));
      continue;
    }
    const std::string kind = rc.value("kind", std::string("single-edge"));
    if (kind == "single-edge") {
      rewards.push_back(single_edge_reward(g, shape, rc.value("target_fraction", 0.25)));
    } else if (kind == "path-edges") {
      rewards.push_back(path_edges_reward(g, shape, rc.value("k", 1),
                                          rc.value("seed", cfg.value("seed", std::uint64_t{0}))));
    } else {
      throw Error(ErrorCode::kFormat, "unknown reward kind " + kind);
    }
  }
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    write_reward(out / ("reward_" + std::to_string(i) + ".json"), g, rewards[i]);
  }
  return rewards;
}

}  // namespace

PipelineResult run_pipeline(const json& config, std::ostream& log) {
  json cfg = config;
  PipelineResult result;
  try {
    result.output_dir = cfg.value("output_dir", std::string("palmdiff-run"));
    cfg["output_dir"] = result.output_dir.string();
    const std::uint64_t seed = cfg.value("seed", std::uint64_t{0});
    cfg["seed"] = seed;
    const auto& out = result.output_dir;
    std::filesystem::create_directories(out);

    auto g = pipeline_graph(cfg, out, log);
    TrainConfig train = cfg.value("train", json::object()).get<TrainConfig>();
    if (!cfg.contains("train") || !cfg["train"].contains("seed")) train.seed = seed;
    cfg["train"] = train;
    DenoiserConfig model_config = cfg.value("model", json::object()).get<DenoiserConfig>();
    if (!cfg.contains("model") || !cfg["model"].contains("seed")) model_config.seed = seed;
    cfg["model"] = model_config;
    const Dataset dataset = pipeline_dataset(cfg, g, out, log);

    Checkpoint ckpt = make_untrained(*g, train, model_config);
    log << "training: " << ckpt.model->params().scalar_count() << " parameters\n";
    const int every = std::max(1, train.epochs / 10);
    const TrainReport report =
        palmdiff::train(*ckpt.model, *ckpt.kernel, dataset, train, [&](const EpochRecord& r) {
          if (r.epoch % every == 0 || r.epoch + 1 == train.epochs) {
            log << "epoch " << r.epoch << " steps " << r.steps << " loss " << r.train_loss
                << " val " << r.val_loss << "\n";
          }
        });
    {
      std::ostringstream csv;
      write_loss_csv(csv, report);
      write_text_file(out / "loss.csv", csv.str());
    }
    save_checkpoint(out / "checkpoint.json", *g, ckpt);

    const std::vector<RewardSpec> rewards = pipeline_rewards(cfg, *g, ckpt.shape, out);
    SweepConfig sweep = cfg.value("sweep", json::object()).get<SweepConfig>();
    if (!cfg.contains("sweep") || !cfg["sweep"].contains("seed")) sweep.seed = seed;
    cfg["sweep"] = sweep;
    write_text_file(out / "config.resolved.json", cfg.dump(2) + "\n");

    result.records = run_sweep(ckpt, *g, rewards, sweep, [&](const SweepRecord& r) {
      log << "cell " << r.instance << " lambda=" << r.lambda << " reward=" << r.mean_reward
          << " VR=" << r.metrics.valid_rate << " TV=" << r.metrics.tv << "\n";
    });
    std::ostringstream csv;
    csv << "# config=" << cfg.dump() << '\n';
    write_sweep_csv(csv, result.records);
    write_text_file(out / "sweep.csv", csv.str());
    write_plot_files(out, result.records);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("pipeline config: ") + e.what());
  }
  result.resolved_config = std::move(cfg);
  return result;
}

}  // namespace palmdiff
