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
#include "fairtc/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_set>

#include "fairtc/error.hpp"

namespace fairtc {
namespace {

// Floyd's algorithm: `count` distinct values from [0, n), returned sorted.
std::vector<std::uint64_t> sample_distinct(std::uint64_t n, std::uint64_t count,
                                           std::mt19937_64& rng) {
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(count * 2);
  for (std::uint64_t j = n - count; j < n; ++j) {
    const std::uint64_t t = std::uniform_int_distribution<std::uint64_t>(0, j)(rng);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  std::vector<std::uint64_t> out(chosen.begin(), chosen.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::uint64_t ceil_count(double density, std::uint64_t slice) {
  const double target = density * static_cast<double>(slice);
  const auto c = static_cast<std::uint64_t>(std::ceil(target - 1e-9 * std::max(1.0, target)));
  return std::min(c, slice);
}

}  // namespace

void SynthSpec::validate() const {
  if (dims.size() < 2) throw ArgumentError("synthetic tensor needs at least two modes");
  for (std::size_t d : dims) {
    if (d == 0) throw ArgumentError("synthetic dims must be positive");
  }
  if (rank == 0) throw ArgumentError("synthetic rank must be positive");
  if (sensitive_mode >= dims.size()) throw ArgumentError("sensitive mode out of range");
  if (majority_entities + minority_entities != dims[sensitive_mode]) {
    throw ArgumentError("group sizes must sum to the sensitive mode size");
  }
  if (majority_entities == 0 || minority_entities == 0) {
    throw ArgumentError("both groups need at least one entity, otherwise a group has no entries");
  }
  if (!(majority_density > 0.0 && majority_density <= 1.0) ||
      !(minority_density > 0.0 && minority_density <= 1.0)) {
    throw ArgumentError("densities must lie in (0, 1]");
  }
  if (!(noise_std >= 0.0)) throw ArgumentError("noise_std must be non-negative");
  if (!(cluster_spread >= 0.0 && cluster_spread <= 1.0)) {
    throw ArgumentError("cluster_spread must lie in [0, 1]");
  }
}

SynthData generate(const SynthSpec& spec) {
  spec.validate();
  const std::size_t order = spec.dims.size();
  const std::size_t s = spec.sensitive_mode;
  std::mt19937_64 rng(spec.seed);

  // Positive factors scaled so an average entry is about 1.
  FactorModel truth(ModelKind::kCp, spec.dims, spec.rank);
  const double hi =
      2.0 * std::pow(1.0 / static_cast<double>(spec.rank), 1.0 / static_cast<double>(order));
  std::uniform_real_distribution<double> factor_dist(0.0, hi);
  for (double& v : truth.params()) v = factor_dist(rng);
  if (spec.clusters > 0) {
    std::vector<double> protos(spec.clusters * spec.rank);
    for (double& v : protos) v = factor_dist(rng);
    std::uniform_int_distribution<std::size_t> pick(0, spec.clusters - 1);
    for (std::size_t i = 0; i < spec.dims[s]; ++i) {
      const std::size_t c = pick(rng);
      auto row = truth.row(s, i);
      for (std::size_t r = 0; r < spec.rank; ++r) {
        row[r] = (1.0 - spec.cluster_spread) * protos[c * spec.rank + r] +
                 spec.cluster_spread * row[r];
      }
    }
  }

  // Linear index over the non-sensitive modes, row-major in mode order.
  std::uint64_t rest = 1;
  for (std::size_t n = 0; n < order; ++n) {
    if (n != s) rest *= spec.dims[n];
  }

  std::vector<Index> coords;
  std::vector<double> values;
  std::normal_distribution<double> noise(0.0, spec.noise_std);
  std::vector<Index> idx(order);

  const struct {
    std::size_t first, count;
    double density;
  } groups[2] = {{0, spec.majority_entities, spec.majority_density},
                 {spec.majority_entities, spec.minority_entities, spec.minority_density}};

  for (const auto& g : groups) {
    const std::uint64_t slice = static_cast<std::uint64_t>(g.count) * rest;
    for (std::uint64_t lin : sample_distinct(slice, ceil_count(g.density, slice), rng)) {
      idx[s] = static_cast<Index>(g.first + lin / rest);
      std::uint64_t r = lin % rest;
      for (std::size_t n = order; n-- > 0;) {
        if (n == s) continue;
        idx[n] = static_cast<Index>(r % spec.dims[n]);
        r /= spec.dims[n];
      }
      coords.insert(coords.end(), idx.begin(), idx.end());
      double v = predict_cp(truth, idx);
      if (spec.noise_std > 0.0) v += noise(rng);
      values.push_back(v);
    }
  }

  std::vector<int> group_of(spec.dims[s], 0);
  std::fill(group_of.begin() + spec.majority_entities, group_of.end(), 1);
  return SynthData{SparseTensor(spec.dims, std::move(coords), std::move(values)),
                   SensitiveContext(s, std::move(group_of), {"majority", "minority"}),
                   std::move(truth)};
}

}  // namespace fairtc
