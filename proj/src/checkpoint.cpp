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

#include "palmdiff/checkpoint.hpp"

#include <algorithm>
#include <vector>

#include "palmdiff/error.hpp"
#include "palmdiff/graph_io.hpp"

namespace palmdiff {

using nlohmann::json;

void to_json(json& j, const TrainConfig& c) {
  j = json{{"timesteps", c.timesteps},
           {"schedule_offset", c.schedule_offset},
           {"gamma", c.gamma},
           {"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"learning_rate", c.learning_rate},
           {"weight_decay", c.weight_decay},
           {"seed", c.seed},
           {"validation_split", c.validation_split},
           {"max_steps", c.max_steps}};
}

void from_json(const json& j, TrainConfig& c) {
  c.timesteps = j.value("timesteps", c.timesteps);
  c.schedule_offset = j.value("schedule_offset", c.schedule_offset);
  c.gamma = j.value("gamma", c.gamma);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.seed = j.value("seed", c.seed);
  c.validation_split = j.value("validation_split", c.validation_split);
  c.max_steps = j.value("max_steps", c.max_steps);
}

void to_json(json& j, const DenoiserConfig& c) {
  j = json{{"hidden", c.hidden}, {"blocks", c.blocks}, {"time_dim", c.time_dim}, {"seed", c.seed}};
}

void from_json(const json& j, DenoiserConfig& c) {
  c.hidden = j.value("hidden", c.hidden);
  c.blocks = j.value("blocks", c.blocks);
  c.time_dim = j.value("time_dim", c.time_dim);
  c.seed = j.value("seed", c.seed);
}

Checkpoint make_untrained(const LayeredGraph& g, const TrainConfig& train,
                          const DenoiserConfig& model_config) {
  Checkpoint c;
  c.shape = std::make_shared<const PalmShape>(g);
  c.model = std::make_shared<Denoiser>(c.shape, train.timesteps, model_config);
  c.kernel = std::make_shared<const TransitionKernel>(
      c.shape, NoiseSchedule::cosine(train.timesteps, train.schedule_offset));
  c.train = train;
  c.graph_fingerprint = fingerprint_hex(graph_fingerprint(g));
  return c;
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> flat(m.data(), m.data() + m.size());
  return flat;
}

void matrix_from_json(const json& j, Eigen::MatrixXd& m, const std::string& name) {
  const auto flat = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != m.size()) {
    throw Error(ErrorCode::kFormat, "tensor " + name + " has " + std::to_string(flat.size()) +
                                        " values, expected " + std::to_string(m.size()));
  }
  std::copy(flat.begin(), flat.end(), m.data());
}

}  // namespace

std::string checkpoint_to_text(const LayeredGraph& g, const Checkpoint& ckpt) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["kind"] = "palmdiff-checkpoint";
  doc["graph_fingerprint"] = fingerprint_hex(graph_fingerprint(g));
  const auto degrees = ckpt.shape->degrees();
  doc["palm_degrees"] = std::vector<int>(degrees.begin(), degrees.end());
  doc["palm_width"] = ckpt.shape->max_degree();
  doc["train_config"] = ckpt.train;
  doc["model_config"] = ckpt.model->config();
  const ParameterSet& params = ckpt.model->params();
  doc["optimizer"] = {{"kind", "adamw"}, {"step", params.step}};
  json tensors = json::array();
  for (const auto& t : params.tensors) {
    tensors.push_back({{"name", t.name},
                       {"rows", t.value.rows()},
                       {"cols", t.value.cols()},
                       {"value", matrix_to_json(t.value)},
                       {"first_moment", matrix_to_json(t.first_moment)},
                       {"second_moment", matrix_to_json(t.second_moment)}});
  }
  doc["tensors"] = std::move(tensors);
  return doc.dump() + "\n";
}

void save_checkpoint(const std::filesystem::path& file, const LayeredGraph& g,
                     const Checkpoint& ckpt) {
  write_text_file(file, checkpoint_to_text(g, ckpt));
}

Checkpoint checkpoint_from_text(const std::string& text, const LayeredGraph& g) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kFormat, std::string("checkpoint: ") + e.what());
  }
  try {
    if (doc.value("kind", std::string()) != "palmdiff-checkpoint" ||
        doc.value("format_version", -1) != kFormatVersion) {
      throw Error(ErrorCode::kFormat, "not a palmdiff checkpoint of format_version 1");
    }
    const std::string expected = fingerprint_hex(graph_fingerprint(g));
    const std::string found = doc.at("graph_fingerprint").get<std::string>();
    if (found != expected) {
      throw Error(ErrorCode::kFingerprintMismatch,
                  "checkpoint graph " + found + " differs from graph " + expected);
    }
    const TrainConfig train = doc.at("train_config").get<TrainConfig>();
    const DenoiserConfig model_config = doc.at("model_config").get<DenoiserConfig>();
    Checkpoint c = make_untrained(g, train, model_config);
    const auto degrees = doc.at("palm_degrees").get<std::vector<int>>();
    if (!(PalmShape(degrees) == *c.shape)) {
      throw Error(ErrorCode::kShapeMismatch, "checkpoint PALM shape differs from the graph");
    }
    ParameterSet& params = c.model->params();
    const json& tensors = doc.at("tensors");
    if (tensors.size() != params.tensors.size()) {
      throw Error(ErrorCode::kFormat, "checkpoint tensor count differs from the model layout");
    }
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
      auto& t = params.tensors[i];
      const json& jt = tensors[i];
      if (jt.at("name").get<std::string>() != t.name ||
          jt.at("rows").get<Eigen::Index>() != t.value.rows() ||
          jt.at("cols").get<Eigen::Index>() != t.value.cols()) {
        throw Error(ErrorCode::kFormat, "tensor " + std::to_string(i) + " does not match " + t.name);
      }
      matrix_from_json(jt.at("value"), t.value, t.name);
      matrix_from_json(jt.at("first_moment"), t.first_moment, t.name);
      matrix_from_json(jt.at("second_moment"), t.second_moment, t.name);
    }
    params.step = doc.at("optimizer").at("step").get<std::int64_t>();
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("checkpoint: ") + e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& file, const LayeredGraph& g) {
  return checkpoint_from_text(read_text_file(file), g);
}

}  // namespace palmdiff
