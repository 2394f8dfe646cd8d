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
#include "fairtc/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "fairtc/error.hpp"

namespace fairtc {
namespace {

double max_pairwise_gap(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo;
}

}  // namespace

EvalResult evaluate_predictions(std::span<const double> targets,
                                std::span<const double> predictions,
                                std::span<const int> groups, int num_groups) {
  if (targets.size() != predictions.size() || targets.size() != groups.size()) {
    throw ArgumentError("evaluate: input lengths differ");
  }
  if (num_groups < 2) throw ArgumentError("evaluate: need at least two groups");

  EvalResult out;
  out.per_group.assign(num_groups, {});
  std::vector<double> sq(num_groups, 0.0), ab(num_groups, 0.0), pr(num_groups, 0.0);
  double total_sq = 0.0;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const int g = groups[k];
    if (g < 0 || g >= num_groups) throw ArgumentError("evaluate: group id out of range");
    const double err = targets[k] - predictions[k];
    total_sq += err * err;
    sq[g] += err * err;
    ab[g] += std::abs(err);
    pr[g] += std::abs(predictions[k]);
    ++out.per_group[g].count;
  }

  std::vector<double> maes(num_groups), madrs(num_groups);
  for (int g = 0; g < num_groups; ++g) {
    auto& s = out.per_group[g];
    if (s.count == 0) {
      throw ArgumentError("group " + std::to_string(g) + " has no entries; MADE is undefined");
    }
    const double n = static_cast<double>(s.count);
    s.mse = sq[g] / n;
    s.mae = ab[g] / n;
    s.mean_abs_prediction = pr[g] / n;
    maes[g] = s.mae;
    madrs[g] = s.mean_abs_prediction;
  }
  out.mse = total_sq / static_cast<double>(targets.size());
  out.made = max_pairwise_gap(maes);
  out.madr = max_pairwise_gap(madrs);
  return out;
}

EvalResult evaluate(const FactorModel& model, const SparseTensor& test,
                    const SensitiveContext& ctx) {
  std::vector<double> preds(test.nnz());
  std::vector<int> groups(test.nnz());
  for (std::size_t e = 0; e < test.nnz(); ++e) {
    preds[e] = predict(model, test.index(e));
    groups[e] = ctx.group_of_entry(test, e);
  }
  return evaluate_predictions(test.values(), preds, groups, ctx.num_groups());
}

double mean_squared_error(const FactorModel& model, const SparseTensor& data) {
  if (data.empty()) throw ArgumentError("mean_squared_error: empty tensor");
  double sum = 0.0;
  for (std::size_t e = 0; e < data.nnz(); ++e) {
    const double err = data.value(e) - predict(model, data.index(e));
    sum += err * err;
  }
  return sum / static_cast<double>(data.nnz());
}

std::vector<std::size_t> group_counts(const SparseTensor& tensor,
                                      const SensitiveContext& ctx) {
  std::vector<std::size_t> counts(ctx.num_groups(), 0);
  for (std::size_t e = 0; e < tensor.nnz(); ++e) ++counts[ctx.group_of_entry(tensor, e)];
  return counts;
}

std::string to_json(const EvalResult& result, const std::vector<std::string>& group_names) {
  nlohmann::ordered_json j;
  j["mse"] = result.mse;
  j["made"] = result.made;
  j["madr"] = result.madr;
  nlohmann::ordered_json groups = nlohmann::ordered_json::object();
  for (std::size_t g = 0; g < result.per_group.size(); ++g) {
    const auto& s = result.per_group[g];
    const std::string name = g < group_names.size() ? group_names[g] : std::to_string(g);
    groups[name] = {{"count", s.count}, {"mse", s.mse}, {"mae", s.mae}};
  }
  j["per_group"] = std::move(groups);
  return j.dump(2);
}

}  // namespace fairtc
