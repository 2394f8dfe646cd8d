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
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fairtc/augmentation.hpp"
#include "fairtc/metrics.hpp"
#include "fairtc/model.hpp"
#include "fairtc/synthetic.hpp"
#include "fairtc/tensor.hpp"
#include "fairtc/trainer.hpp"

namespace fairtc {

// Training methods compared by the harness. All but kRandom map directly to a
// trainer objective; kRandom pretrains, adds randomly placed model-valued
// entries, and retrains with the plain objective.
enum class Method { kPlain, kMadrPenalty, kMadePenalty, kRandom, kStaff };

std::string to_string(Method method);
Method parse_method(const std::string& name);

struct AugmentConfig {
  std::size_t k = 5;
  double gamma = 0.5;
  std::size_t p = 30;
  std::size_t q = 30;
  TargetRule targets = TargetRule::kAll;
};

// Empty lists fall back to the scalar settings.
struct SweepConfig {
  std::vector<double> fairness_coeff;
  std::vector<double> gamma;
  std::vector<std::size_t> k;
  std::vector<double> keep_rate;
};

struct DataConfig {
  bool synthetic = true;
  SynthSpec synth;
  std::filesystem::path tensor_path;
  std::filesystem::path sensitive_path;
  std::size_t sensitive_mode = 0;
  std::optional<std::vector<std::size_t>> dims;
  SplitRatios split;
  double keep_rate = 1.0;
};

struct ExperimentConfig {
  DataConfig data;
  ModelKind model = ModelKind::kCp;
  CostcoConfig costco;
  double init_scale = 0.1;
  std::vector<Method> methods = {Method::kPlain};
  TrainConfig train;
  AugmentConfig augmentation;
  SweepConfig sweep;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::size_t workers = 1;
  std::filesystem::path output_dir = "results";
  bool write_logs = true;
};

ExperimentConfig default_config();
SynthSpec default_synth_spec();

// Relative data paths are resolved against `base_dir`.
ExperimentConfig parse_config(const std::string& yaml_text,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
SynthSpec load_synth_spec(const std::filesystem::path& path);
std::string config_to_yaml(const ExperimentConfig& cfg);

// Defaults as YAML, followed by the full hyper-parameter grid as
// commented-out sweep lists.
std::string defaults_text();

struct Dataset {
  SparseTensor tensor;
  SensitiveContext context;
};

Dataset load_dataset(const DataConfig& data);

// One point of the grid.
struct RunSetting {
  Method method = Method::kPlain;
  double keep_rate = 1.0;
  double fairness_coeff = 0.0;
  double gamma = 0.5;
  std::size_t k = 5;
  std::uint64_t seed = 0;
};

struct StaffResult {
  TrainReport pretrain;
  FairGraph graph;
  AugmentedTensor augmented;
  AssembledTensor assembled;
  TrainReport final;
};

// Two-stage pipeline: plain pretraining, fairness-aware graph, entity
// augmentation, then coupled training on the enlarged tensor. The final model
// starts from the same seeded initialization a plain run would use, with
// separately drawn rows for the augmented entities.
StaffResult fit_staff(const SparseTensor& train_data, const SparseTensor& validation,
                      const SensitiveContext& ctx, const TrainConfig& cfg,
                      const AugmentConfig& aug, ModelKind kind,
                      const CostcoConfig& costco, double init_scale);

struct RunOutcome {
  RunSetting setting;
  EvalResult test;
  TrainReport report;                    // final-stage training
  std::optional<TrainReport> pretrain;   // staff and random only
};

RunOutcome run_setting(const ExperimentConfig& cfg, const Dataset& data,
                       const RunSetting& setting);

// Grid in output order: method, keep_rate, fairness_coeff, gamma, k, seed.
std::vector<RunSetting> expand_grid(const ExperimentConfig& cfg);

struct ExperimentStatus {
  std::size_t rows_written = 0;
  std::vector<std::string> failures;
};

// Runs every grid point and writes results.csv, summary.json and (optionally)
// per-run training logs into cfg.output_dir.
ExperimentStatus run_experiment(const ExperimentConfig& cfg, std::ostream& log);

struct TradeoffRow {
  std::string model;
  double keep_rate = 0.0;
  std::string objective;
  double fairness_coeff = 0.0;
  double gamma = 0.0;
  std::size_t k = 0;
  std::size_t seeds = 0;
  double mse = 0.0;
  double made = 0.0;
  bool pareto = true;
};

struct ResultRow {
  std::string model, objective;
  double keep_rate = 0.0, fairness_coeff = 0.0, gamma = 0.0;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  double mse = 0.0, made = 0.0, madr = 0.0;
};

std::vector<ResultRow> read_results(const std::filesystem::path& csv_path);

// Per (model, keep_rate, objective): the setting with the lowest seed-mean
// mse + made, flagged Pareto-optimal or dominated within its panel.
std::vector<TradeoffRow> compute_tradeoff(const std::vector<ResultRow>& rows);

// Reads results.csv from `dir`, writes tradeoff.csv and prints a table.
std::vector<TradeoffRow> report(const std::filesystem::path& dir, std::ostream& out);

}  // namespace fairtc
