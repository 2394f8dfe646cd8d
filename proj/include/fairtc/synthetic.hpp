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
#include <vector>

#include "fairtc/model.hpp"
#include "fairtc/tensor.hpp"

namespace fairtc {

// Ground-truth tensor with two groups along the sensitive mode. Entities
// [0, majority_entities) form the majority group (id 0), the rest the
// minority group (id 1).
struct SynthSpec {
  std::vector<std::size_t> dims;
  std::size_t rank = 3;
  std::size_t sensitive_mode = 0;
  std::size_t majority_entities = 0;
  std::size_t minority_entities = 0;
  double majority_density = 0.1;
  double minority_density = 0.01;
  double noise_std = 0.0;
  // Sensitive entities are drawn around `clusters` shared prototype rows
  // (0 draws them independently); `cluster_spread` in [0, 1] mixes in an
  // independent row per entity.
  std::size_t clusters = 0;
  double cluster_spread = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthData {
  SparseTensor tensor;
  SensitiveContext context;
  FactorModel truth;  // CP model the values were drawn from
};

// Each group observes ceil(density * slice) distinct index tuples, where the
// slice is every tuple whose sensitive coordinate belongs to the group.
// Values are the ground-truth CP reconstruction plus N(0, noise_std^2).
// Cluster membership is drawn uniformly and independently of group.
SynthData generate(const SynthSpec& spec);

}  // namespace fairtc
