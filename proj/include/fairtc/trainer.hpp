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
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairtc/model.hpp"
#include "fairtc/tensor.hpp"

namespace fairtc {

enum class Objective { kPlain, kMadrPenalty, kMadePenalty, kStaff };

std::string to_string(Objective objective);
Objective parse_objective(const std::string& name);

struct TrainConfig {
  std::size_t rank = 10;
  std::size_t batch_size = 1024;
  double learning_rate = 1e-2;
  double weight_decay = 0.0;    // lambda_r
  double fairness_coeff = 0.0;  // lambda_f: MADR/MADE penalty weight or coupling weight
  int max_epochs = 200;
  int patience = 10;  // epochs without validation improvement; <= 0 disables
  std::uint64_t seed = 0;
  Objective objective = Objective::kPlain;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_mse = 0.0;
  double val_made = 0.0;  // NaN when validation lacks a group
};

struct TrainReport {
  std::vector<EpochStats> history;
  int best_epoch = 0;
  FactorModel model;  // parameters from best_epoch
};

// Ties an original sensitive entity to its augmented copy.
struct CouplingPair {
  std::size_t original = 0;
  std::size_t augmented = 0;

  bool operator==(const CouplingPair&) const = default;
};

// Adam with bias correction, updating every parameter each step.
class Adam {
 public:
  Adam(std::size_t num_params, double learning_rate, double beta1 = 0.9,
       double beta2 = 0.999, double epsilon = 1e-8);

  void step(std::span<double> params, std::span<const double> grad);
  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

// Sum of squared residuals over the batch plus the weight-decay term
// weight_decay * (|batch| / total_entries) * ||params||^2. total_entries == 0
// leaves the decay term out.
double loss_plain(const FactorModel& model, const SparseTensor& data,
                  std::span<const std::size_t> batch, double weight_decay = 0.0,
                  std::size_t total_entries = 0);

// A penalty as a function of the batch predictions: its value and the
// derivative of the value with respect to each prediction.
struct PenaltyTerms {
  double value = 0.0;
  std::vector<double> d_prediction;
};

// Gap between group means of |prediction|. Zero when fewer than two groups
// appear. |.| has subgradient 0 at 0.
PenaltyTerms madr_terms(std::span<const double> predictions,
                        std::span<const int> groups, int num_groups);
// Gap between group means of |prediction - target|.
PenaltyTerms made_terms(std::span<const double> predictions,
                        std::span<const double> targets,
                        std::span<const int> groups, int num_groups);

// The penalties above evaluated through the model. Each returns
// weight * penalty and adds weight * d(penalty)/d(params) into `grad`
// (laid out like model.params(); pass an empty span to skip).
double penalty_madr(const FactorModel& model, const SparseTensor& data,
                    std::span<const std::size_t> batch,
                    const SensitiveContext& ctx, std::span<double> grad,
                    double weight = 1.0);
double penalty_made(const FactorModel& model, const SparseTensor& data,
                    std::span<const std::size_t> batch,
                    const SensitiveContext& ctx, std::span<double> grad,
                    double weight = 1.0);

// weight * sum ||u_original - u_augmented||^2 over the sensitive factor.
double penalty_coupling(const FactorModel& model, std::size_t sensitive_mode,
                        std::span<const CouplingPair> pairs, double weight,
                        std::span<double> grad);

// Minibatch Adam training with early stopping on validation MSE.
//
// `ctx` must cover every entity of the model's sensitive mode. `coupling` is
// required for the staff objective and rejected otherwise.
TrainReport train(const FactorModel& model, const SparseTensor& train_data,
                  const SparseTensor& validation, const SensitiveContext& ctx,
                  const TrainConfig& cfg,
                  const std::optional<std::vector<CouplingPair>>& coupling = std::nullopt);

// epoch,train_loss,val_mse,val_made
void write_training_log(const TrainReport& report, std::ostream& out);

}  // namespace fairtc
