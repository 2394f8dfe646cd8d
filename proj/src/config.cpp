// Copyright 2026 The fairtc Authors
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
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "fairtc/error.hpp"
#include "fairtc/experiment.hpp"

namespace fairtc {
namespace {

void check_keys(const YAML::Node& node, const std::string& section,
                const std::set<std::string>& allowed) {
  if (!node) return;
  if (!node.IsMap()) throw ConfigError("section '" + section + "' must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) {
      throw ConfigError("unknown key '" + key + "' in " +
                        (section.empty() ? std::string("config") : "section '" + section + "'"));
    }
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out) {
  if (!node || !node[key]) return;
  try {
    out = node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(std::string("invalid value for '") + key + "'");
  }
}

template <typename T>
void read_list(const YAML::Node& node, const char* key, std::vector<T>& out) {
  if (!node || !node[key]) return;
  const auto& v = node[key];
  try {
    out = v.IsSequence() ? v.as<std::vector<T>>() : std::vector<T>{v.as<T>()};
  } catch (const YAML::Exception&) {
    throw ConfigError(std::string("invalid list for '") + key + "'");
  }
}

SynthSpec parse_synth(const YAML::Node& n, SynthSpec spec) {
  check_keys(n, "synthetic",
             {"dims", "rank", "sensitive_mode", "majority_entities", "minority_entities",
              "majority_density", "minority_density", "noise_std", "clusters", "cluster_spread",
              "seed"});
  read_list(n, "dims", spec.dims);
  read(n, "rank", spec.rank);
  read(n, "sensitive_mode", spec.sensitive_mode);
  read(n, "majority_entities", spec.majority_entities);
  read(n, "minority_entities", spec.minority_entities);
  read(n, "majority_density", spec.majority_density);
  read(n, "minority_density", spec.minority_density);
  read(n, "noise_std", spec.noise_std);
  read(n, "clusters", spec.clusters);
  read(n, "cluster_spread", spec.cluster_spread);
  read(n, "seed", spec.seed);
  return spec;
}

YAML::Node parse_yaml(const std::string& text) {
  try {
    return YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
}

void emit_synth(YAML::Emitter& out, const SynthSpec& s) {
  out << YAML::BeginMap;
  out << YAML::Key << "dims" << YAML::Value << YAML::Flow << s.dims;
  out << YAML::Key << "rank" << YAML::Value << s.rank;
  out << YAML::Key << "sensitive_mode" << YAML::Value << s.sensitive_mode;
  out << YAML::Key << "majority_entities" << YAML::Value << s.majority_entities;
  out << YAML::Key << "minority_entities" << YAML::Value << s.minority_entities;
  out << YAML::Key << "majority_density" << YAML::Value << s.majority_density;
  out << YAML::Key << "minority_density" << YAML::Value << s.minority_density;
  out << YAML::Key << "noise_std" << YAML::Value << s.noise_std;
  out << YAML::Key << "clusters" << YAML::Value << s.clusters;
  out << YAML::Key << "cluster_spread" << YAML::Value << s.cluster_spread;
  out << YAML::Key << "seed" << YAML::Value << s.seed;
  out << YAML::EndMap;
}

}  // namespace

std::string to_string(Method method) {
  switch (method) {
    case Method::kPlain: return "plain";
    case Method::kMadrPenalty: return "madr_penalty";
    case Method::kMadePenalty: return "made_penalty";
    case Method::kRandom: return "random";
    case Method::kStaff: return "staff";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "random") return Method::kRandom;
  switch (parse_objective(name)) {
    case Objective::kPlain: return Method::kPlain;
    case Objective::kMadrPenalty: return Method::kMadrPenalty;
    case Objective::kMadePenalty: return Method::kMadePenalty;
    case Objective::kStaff: return Method::kStaff;
  }
  throw ConfigError("unknown objective '" + name + "'");
}

SynthSpec default_synth_spec() {
  SynthSpec s;
  s.dims = {60, 40, 20};
  s.rank = 3;
  s.sensitive_mode = 0;
  s.majority_entities = 30;
  s.minority_entities = 30;
  s.majority_density = 0.2;
  s.minority_density = 0.02;
  s.noise_std = 0.1;
  s.seed = 7;
  return s;
}

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  cfg.data.synth = default_synth_spec();
  cfg.train.rank = 10;
  cfg.train.batch_size = 1024;
  cfg.train.learning_rate = 1e-2;
  cfg.train.weight_decay = 1e-3;
  cfg.train.fairness_coeff = 1.0;
  cfg.train.max_epochs = 300;
  cfg.train.patience = 10;
  return cfg;
}

ExperimentConfig parse_config(const std::string& yaml_text, const std::filesystem::path& base_dir) {
  const YAML::Node root = parse_yaml(yaml_text);
  ExperimentConfig cfg = default_config();
  if (!root || root.IsNull()) return cfg;
  check_keys(root, "",
             {"output_dir", "model", "objective", "objectives", "seeds", "workers", "init_scale",
              "write_logs", "data", "synthetic", "train", "costco", "augmentation", "sweep"});

  std::string s;
  if (root["output_dir"]) {
    std::filesystem::path out = root["output_dir"].as<std::string>();
    cfg.output_dir = out.is_relative() && !base_dir.empty() ? base_dir / out : out;
  }
  if (root["model"]) cfg.model = parse_model_kind(root["model"].as<std::string>());
  if (root["objective"] && root["objectives"]) {
    throw ConfigError("give either 'objective' or 'objectives', not both");
  }
  std::vector<std::string> methods;
  read_list(root, "objective", methods);
  read_list(root, "objectives", methods);
  if (!methods.empty()) {
    cfg.methods.clear();
    for (const auto& m : methods) cfg.methods.push_back(parse_method(m));
  }
  read_list(root, "seeds", cfg.seeds);
  read(root, "workers", cfg.workers);
  read(root, "init_scale", cfg.init_scale);
  read(root, "write_logs", cfg.write_logs);

  const YAML::Node data = root["data"];
  check_keys(data, "data",
             {"source", "tensor", "sensitive", "sensitive_mode", "dims", "split", "keep_rate"});
  if (data) {
    std::string source = "synthetic";
    read(data, "source", source);
    if (source == "synthetic") {
      cfg.data.synthetic = true;
    } else if (source == "files") {
      cfg.data.synthetic = false;
      std::string tensor, sensitive;
      read(data, "tensor", tensor);
      read(data, "sensitive", sensitive);
      if (tensor.empty() || sensitive.empty()) {
        throw ConfigError("file data source needs 'tensor' and 'sensitive' paths");
      }
      auto resolve = [&](const std::filesystem::path& p) {
        return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
      };
      cfg.data.tensor_path = resolve(tensor);
      cfg.data.sensitive_path = resolve(sensitive);
      read(data, "sensitive_mode", cfg.data.sensitive_mode);
      if (data["dims"]) {
        std::vector<std::size_t> dims;
        read_list(data, "dims", dims);
        cfg.data.dims = dims;
      }
    } else {
      throw ConfigError("data.source must be 'synthetic' or 'files'");
    }
    if (data["split"]) {
      std::vector<double> r;
      read_list(data, "split", r);
      if (r.size() != 3) throw ConfigError("data.split needs three ratios");
      cfg.data.split = {r[0], r[1], r[2]};
    }
    read(data, "keep_rate", cfg.data.keep_rate);
  }
  if (root["synthetic"]) cfg.data.synth = parse_synth(root["synthetic"], cfg.data.synth);

  const YAML::Node train = root["train"];
  check_keys(train, "train",
             {"rank", "batch_size", "learning_rate", "weight_decay", "fairness_coeff",
              "max_epochs", "patience"});
  read(train, "rank", cfg.train.rank);
  read(train, "batch_size", cfg.train.batch_size);
  read(train, "learning_rate", cfg.train.learning_rate);
  read(train, "weight_decay", cfg.train.weight_decay);
  read(train, "fairness_coeff", cfg.train.fairness_coeff);
  read(train, "max_epochs", cfg.train.max_epochs);
  read(train, "patience", cfg.train.patience);

  const YAML::Node costco = root["costco"];
  check_keys(costco, "costco", {"channels", "hidden", "activation"});
  read(costco, "channels", cfg.costco.channels);
  read(costco, "hidden", cfg.costco.hidden);
  if (costco && costco["activation"]) {
    cfg.costco.activation = parse_activation(costco["activation"].as<std::string>());
  }

  const YAML::Node aug = root["augmentation"];
  check_keys(aug, "augmentation", {"k", "gamma", "p", "q", "targets"});
  read(aug, "k", cfg.augmentation.k);
  read(aug, "gamma", cfg.augmentation.gamma);
  read(aug, "p", cfg.augmentation.p);
  read(aug, "q", cfg.augmentation.q);
  if (aug && aug["targets"]) {
    cfg.augmentation.targets = parse_target_rule(aug["targets"].as<std::string>());
  }

  const YAML::Node sweep = root["sweep"];
  check_keys(sweep, "sweep", {"fairness_coeff", "gamma", "k", "keep_rate"});
  read_list(sweep, "fairness_coeff", cfg.sweep.fairness_coeff);
  read_list(sweep, "gamma", cfg.sweep.gamma);
  read_list(sweep, "k", cfg.sweep.k);
  read_list(sweep, "keep_rate", cfg.sweep.keep_rate);

  if (cfg.seeds.empty()) throw ConfigError("at least one seed is required");
  if (cfg.workers == 0) throw ConfigError("workers must be at least 1");
  if (!(cfg.init_scale > 0.0)) throw ConfigError("init_scale must be positive");
  try {
    cfg.train.validate();
    if (cfg.data.synthetic) cfg.data.synth.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open synthetic spec " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const YAML::Node root = parse_yaml(ss.str());
  SynthSpec spec = root && root["synthetic"] ? parse_synth(root["synthetic"], default_synth_spec())
                                             : parse_synth(root, default_synth_spec());
  try {
    spec.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  return spec;
}

std::string config_to_yaml(const ExperimentConfig& cfg) {
  YAML::Emitter out;
  out.SetDoublePrecision(15);
  out << YAML::BeginMap;
  out << YAML::Key << "output_dir" << YAML::Value << cfg.output_dir.string();
  out << YAML::Key << "model" << YAML::Value << to_string(cfg.model);
  std::vector<std::string> methods;
  for (Method m : cfg.methods) methods.push_back(to_string(m));
  out << YAML::Key << "objectives" << YAML::Value << YAML::Flow << methods;
  out << YAML::Key << "seeds" << YAML::Value << YAML::Flow << cfg.seeds;
  out << YAML::Key << "workers" << YAML::Value << cfg.workers;
  out << YAML::Key << "init_scale" << YAML::Value << cfg.init_scale;
  out << YAML::Key << "write_logs" << YAML::Value << cfg.write_logs;

  out << YAML::Key << "data" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "source" << YAML::Value << (cfg.data.synthetic ? "synthetic" : "files");
  if (!cfg.data.synthetic) {
    out << YAML::Key << "tensor" << YAML::Value << cfg.data.tensor_path.string();
    out << YAML::Key << "sensitive" << YAML::Value << cfg.data.sensitive_path.string();
    out << YAML::Key << "sensitive_mode" << YAML::Value << cfg.data.sensitive_mode;
    if (cfg.data.dims) out << YAML::Key << "dims" << YAML::Value << YAML::Flow << *cfg.data.dims;
  }
  out << YAML::Key << "split" << YAML::Value << YAML::Flow
      << std::vector<double>{cfg.data.split.train, cfg.data.split.validation, cfg.data.split.test};
  out << YAML::Key << "keep_rate" << YAML::Value << cfg.data.keep_rate;
  out << YAML::EndMap;

  if (cfg.data.synthetic) {
    out << YAML::Key << "synthetic" << YAML::Value;
    emit_synth(out, cfg.data.synth);
  }

  out << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "rank" << YAML::Value << cfg.train.rank;
  out << YAML::Key << "batch_size" << YAML::Value << cfg.train.batch_size;
  out << YAML::Key << "learning_rate" << YAML::Value << cfg.train.learning_rate;
  out << YAML::Key << "weight_decay" << YAML::Value << cfg.train.weight_decay;
  out << YAML::Key << "fairness_coeff" << YAML::Value << cfg.train.fairness_coeff;
  out << YAML::Key << "max_epochs" << YAML::Value << cfg.train.max_epochs;
  out << YAML::Key << "patience" << YAML::Value << cfg.train.patience;
  out << YAML::EndMap;

  out << YAML::Key << "costco" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "channels" << YAML::Value << cfg.costco.channels;
  out << YAML::Key << "hidden" << YAML::Value << cfg.costco.hidden;
  out << YAML::Key << "activation" << YAML::Value << to_string(cfg.costco.activation);
  out << YAML::EndMap;

  out << YAML::Key << "augmentation" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "k" << YAML::Value << cfg.augmentation.k;
  out << YAML::Key << "gamma" << YAML::Value << cfg.augmentation.gamma;
  out << YAML::Key << "p" << YAML::Value << cfg.augmentation.p;
  out << YAML::Key << "q" << YAML::Value << cfg.augmentation.q;
  out << YAML::Key << "targets" << YAML::Value << to_string(cfg.augmentation.targets);
  out << YAML::EndMap;

  const auto& sw = cfg.sweep;
  if (!sw.fairness_coeff.empty() || !sw.gamma.empty() || !sw.k.empty() || !sw.keep_rate.empty()) {
    out << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
    if (!sw.fairness_coeff.empty())
      out << YAML::Key << "fairness_coeff" << YAML::Value << YAML::Flow << sw.fairness_coeff;
    if (!sw.gamma.empty()) out << YAML::Key << "gamma" << YAML::Value << YAML::Flow << sw.gamma;
    if (!sw.k.empty()) out << YAML::Key << "k" << YAML::Value << YAML::Flow << sw.k;
    if (!sw.keep_rate.empty())
      out << YAML::Key << "keep_rate" << YAML::Value << YAML::Flow << sw.keep_rate;
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string defaults_text() {
  std::string text = config_to_yaml(default_config());
  text +=
      "# Full sweep grid; uncomment to sweep. Every list multiplies the run count.\n"
      "# sweep:\n"
      "#   fairness_coeff: [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1, 10, 100]\n"
      "#   gamma: [0.1, 0.5, 0.9, 1.0]\n"
      "#   k: [3, 5, 7, 9, 11, 13, 15]\n"
      "#   keep_rate: [1.0, 0.1, 0.05]\n";
  return text;
}

}  // namespace fairtc
