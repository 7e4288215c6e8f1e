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

#include "palmdiff/graph_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "palmdiff/error.hpp"

namespace palmdiff {

using nlohmann::json;

namespace {

constexpr const char* kDatasetMagic = "# palmdiff-dataset";

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kFormat, what + ": " + e.what());
  }
}

void check_version(const json& doc, const std::string& what) {
  if (!doc.is_object() || !doc.contains("format_version")) {
    throw Error(ErrorCode::kFormat, what + ": missing format_version");
  }
  if (doc["format_version"] != kFormatVersion) {
    throw Error(ErrorCode::kFormat, what + ": unsupported format_version " +
                                        doc["format_version"].dump());
  }
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, sep)) out.push_back(field);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string read_text_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + file.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::filesystem::path& file, const std::string& text) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + file.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + file.string());
}

std::string graph_to_json_text(const GraphSpec& spec) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["layers"] = spec.layers;
  json edges = json::array();
  for (const auto& [a, b] : spec.edges) edges.push_back({a, b});
  doc["edges"] = std::move(edges);
  return doc.dump(1) + "\n";
}

GraphSpec graph_spec_from_json_text(const std::string& text) {
  const json doc = parse_json(text, "graph file");
  check_version(doc, "graph file");
  GraphSpec spec;
  try {
    spec.layers = doc.at("layers").get<std::vector<std::vector<std::string>>>();
    for (const auto& e : doc.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw Error(ErrorCode::kFormat, "edge must be [src, dst]");
      spec.edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("graph file: ") + e.what());
  }
  return spec;
}

void write_graph(const std::filesystem::path& file, const LayeredGraph& g) {
  write_text_file(file, graph_to_json_text(g.to_spec()));
}

GraphSpec read_graph_spec(const std::filesystem::path& file) {
  return graph_spec_from_json_text(read_text_file(file));
}

LayeredGraph read_graph(const std::filesystem::path& file) {
  return LayeredGraph::from_spec(read_graph_spec(file));
}

std::uint64_t graph_fingerprint(const LayeredGraph& g) {
  const std::string text = graph_to_json_text(g.to_spec());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fingerprint_hex(std::uint64_t fingerprint) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fingerprint));
  return buf;
}

void write_paths(std::ostream& os, const LayeredGraph& g, std::span<const Path> paths) {
  for (const Path& p : paths) os << path_to_string(g, p) << '\n';
}

std::string samples_to_text(const LayeredGraph& g, std::span<const Path> paths,
                            const std::string& config_json, const std::string& summary) {
  std::ostringstream os;
  os << "# palmdiff-samples format_version=" << kFormatVersion << '\n';
  os << "# config=" << config_json << '\n';
  write_paths(os, g, paths);
  std::istringstream lines(summary);
  std::string line;
  while (std::getline(lines, line)) os << "# " << line << '\n';
  return os.str();
}

std::vector<Path> read_paths(std::istream& is, const LayeredGraph& g) {
  std::vector<Path> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> labels;
    for (const auto& f : split(line, ',')) labels.push_back(trim(f));
    try {
      out.push_back(path_from_labels(g, labels));
    } catch (const Error& e) {
      throw Error(ErrorCode::kInvalidPath, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_dataset(const std::filesystem::path& file, const Dataset& dataset) {
  std::ostringstream os;
  const DatasetSpec& s = dataset.spec;
  os << kDatasetMagic << " format_version=" << kFormatVersion << '\n';
  os << "# graph_fingerprint=" << fingerprint_hex(graph_fingerprint(*dataset.graph)) << '\n';
  os << "# mode=" << (s.mode == DatasetSpec::Mode::kAll ? "all" : "sampled")
     << " count=" << s.count << " law=" << s.law.describe() << " seed=" << s.seed
     << " validation_split=" << s.validation_split << '\n';
  os << "# paths=" << dataset.paths.size() << '\n';
  write_paths(os, *dataset.graph, dataset.paths);
  write_text_file(file, os.str());
}

Dataset read_dataset(const std::filesystem::path& file,
                     std::shared_ptr<const LayeredGraph> graph) {
  const std::string text = read_text_file(file);
  std::istringstream is(text);
  std::string first;
  std::getline(is, first);
  if (first.rfind(kDatasetMagic, 0) != 0) {
    throw Error(ErrorCode::kFormat, file.string() + ": missing dataset header");
  }
  if (first.find("format_version=" + std::to_string(kFormatVersion)) == std::string::npos) {
    throw Error(ErrorCode::kFormat, file.string() + ": unsupported dataset format_version");
  }
  Dataset d;
  d.graph = graph;
  std::string line;
  std::streampos body = is.tellg();
  while (std::getline(is, line) && !line.empty() && line[0] == '#') {
    body = is.tellg();
    std::istringstream fields(line.substr(1));
    std::string kv;
    while (fields >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
      try {
        if (key == "graph_fingerprint" && value != fingerprint_hex(graph_fingerprint(*graph))) {
          throw Error(ErrorCode::kFingerprintMismatch,
                      file.string() + " was built for graph " + value);
        }
        if (key == "mode") d.spec.mode = value == "all" ? DatasetSpec::Mode::kAll : DatasetSpec::Mode::kSampled;
        if (key == "count") d.spec.count = std::stoull(value);
        if (key == "law") d.spec.law = MultiplicityLaw::parse(value);
        if (key == "seed") d.spec.seed = std::stoull(value);
        if (key == "validation_split") d.spec.validation_split = std::stod(value);
      } catch (const std::logic_error&) {
        throw Error(ErrorCode::kFormat, file.string() + ": bad header field " + kv);
      }
    }
  }
  is.clear();
  is.seekg(body);
  d.paths = read_paths(is, *graph);
  return d;
}

void write_reward(const std::filesystem::path& file, const LayeredGraph& g,
                  const RewardSpec& reward) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["label"] = reward.label;
  json edges = json::array();
  for (const auto& [src, dst, value] : reward.edges) edges.push_back({g.label(src), g.label(dst), value});
  doc["edges"] = std::move(edges);
  doc["max_reward"] = reward.max_reward;
  write_text_file(file, doc.dump(1) + "\n");
}

RewardSpec read_reward(const std::filesystem::path& file, const LayeredGraph& g,
                       std::shared_ptr<const PalmShape> shape) {
  const json doc = parse_json(read_text_file(file), file.string());
  check_version(doc, file.string());
  std::vector<EdgeReward> edges;
  std::string label;
  try {
    label = doc.value("label", std::string());
    for (const auto& e : doc.at("edges")) {
      if (!e.is_array() || e.size() != 3) {
        throw Error(ErrorCode::kFormat, file.string() + ": edge must be [src, dst, value]");
      }
      const auto src = g.find(e[0].get<std::string>());
      const auto dst = g.find(e[1].get<std::string>());
      if (!src || !dst) {
        throw Error(ErrorCode::kUnknownEdge, e[0].get<std::string>() + "->" + e[1].get<std::string>());
      }
      edges.emplace_back(*src, *dst, e[2].get<double>());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, file.string() + ": " + e.what());
  }
  return make_reward_spec(g, std::move(shape), std::move(edges), std::move(label));
}

}  // namespace palmdiff
