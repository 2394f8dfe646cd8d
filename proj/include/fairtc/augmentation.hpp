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
#include <span>
#include <string>
#include <vector>

#include "fairtc/model.hpp"
#include "fairtc/tensor.hpp"
#include "fairtc/trainer.hpp"

namespace fairtc {

struct Neighbor {
  std::size_t id = 0;
  double score = 0.0;

  bool operator==(const Neighbor&) const = default;
};

// K nearest sensitive entities under the blended score
//   s(i, j) = gamma * cos(u_i, u_j) + (1 - gamma) * (1 - cos(f_i, f_j))
// where u are sensitive factor rows and f one-hot group features. Lists are
// sorted by score descending, ties by ascending id, and never contain i.
struct FairGraph {
  std::size_t k = 0;
  double gamma = 0.0;
  std::vector<std::vector<Neighbor>> neighbors;
};

// `factor` is the row-major I_s x rank sensitive factor matrix.
FairGraph build_graph(std::span<const double> factor, std::size_t rank,
                      const SensitiveContext& ctx, std::size_t k, double gamma);

enum class TargetRule {
  kAll,          // every sensitive entity gets an augmented copy
  kBelowMedian,  // only entities with fewer observed entries than the median
};

std::string to_string(TargetRule rule);
TargetRule parse_target_rule(const std::string& name);

struct AugmentOptions {
  std::size_t p = 30;  // entries resampled from the entity itself
  std::size_t q = 30;  // entries drawn from its neighbors
  std::uint64_t seed = 0;
  TargetRule targets = TargetRule::kAll;
};

enum class AugmentSource { kOriginal, kNeighbor };

struct AugmentedEntity {
  std::size_t original = 0;
  std::size_t augmented = 0;
  std::size_t from_original = 0;   // min(P, n_i)
  std::size_t from_neighbors = 0;  // neighbor draws kept after de-duplication
  std::size_t dropped = 0;         // neighbor draws that collided
};

struct AugmentedTensor {
  // Generated entries; the sensitive coordinate lies in
  // [original_dim, original_dim + entities.size()).
  SparseTensor entries;
  std::vector<AugmentSource> source;      // per entry
  std::vector<std::size_t> source_entry;  // per entry: training entry it was drawn from
  std::vector<AugmentedEntity> entities;
  std::size_t sensitive_mode = 0;
  std::size_t original_dim = 0;
  std::vector<std::string> warnings;

  std::vector<CouplingPair> pairs() const;
  std::vector<std::size_t> originals() const;
};

// Row used for neighbor-drawn values: mean of the entity's row and its
// neighbors' rows in the pretrained sensitive factor.
std::vector<double> neighborhood_row(const FactorModel& pretrained,
                                     std::size_t sensitive_mode, std::size_t entity,
                                     std::span<const Neighbor> neighbors);

AugmentedTensor generate_entries(const SparseTensor& train, const FairGraph& graph,
                                 const FactorModel& pretrained,
                                 const SensitiveContext& ctx,
                                 const AugmentOptions& options);

struct AssembledTensor {
  SparseTensor tensor;  // original entries first, then augmented
  std::vector<CouplingPair> pairs;
};

AssembledTensor assemble(const SparseTensor& train, const AugmentedTensor& aug);

// Context for the enlarged sensitive mode: augmented entities inherit the
// group of their original.
SensitiveContext augmented_context(const SensitiveContext& ctx,
                                   const AugmentedTensor& aug);

// Random augmentation baseline: `count` unobserved index tuples drawn
// uniformly, valued by the pretrained model. Returns the enlarged tensor.
SparseTensor random_augment(const SparseTensor& train, const FactorModel& pretrained,
                            std::size_t count, std::uint64_t seed);

// COO dump of the generated entries plus `original <ws> augmented` pairs.
void save_augmented(const AugmentedTensor& aug, const std::filesystem::path& tensor_path,
                    const std::filesystem::path& pairs_path);

}  // namespace fairtc
