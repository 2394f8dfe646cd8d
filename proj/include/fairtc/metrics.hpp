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
#include <span>
#include <string>
#include <vector>

#include "fairtc/model.hpp"
#include "fairtc/tensor.hpp"

namespace fairtc {

struct GroupStats {
  std::size_t count = 0;
  double mse = 0.0;
  double mae = 0.0;
  double mean_abs_prediction = 0.0;
};

struct EvalResult {
  double mse = 0.0;
  // Absolute gap between group MAEs. With more than two groups this is the
  // largest pairwise gap.
  double made = 0.0;
  // Same, over group means of |prediction|.
  double madr = 0.0;
  std::vector<GroupStats> per_group;  // indexed by group id
};

// Metrics from explicit predictions. Throws ArgumentError when any group has
// no entries, since MADE is undefined there.
EvalResult evaluate_predictions(std::span<const double> targets,
                                std::span<const double> predictions,
                                std::span<const int> groups, int num_groups);

EvalResult evaluate(const FactorModel& model, const SparseTensor& test,
                    const SensitiveContext& ctx);

// Mean squared error only; defined for any non-empty tensor.
double mean_squared_error(const FactorModel& model, const SparseTensor& data);

std::vector<std::size_t> group_counts(const SparseTensor& tensor,
                                      const SensitiveContext& ctx);

// {"mse":..,"made":..,"madr":..,"per_group":{"<name>":{"count","mse","mae"}}}
std::string to_json(const EvalResult& result,
                    const std::vector<std::string>& group_names);

}  // namespace fairtc
