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
#include <span>
#include <string>
#include <vector>

namespace fairtc {

using Index = std::uint32_t;

// A sparse N-mode tensor in coordinate format. Entries are stored flat:
// entry e occupies coords()[e * order() .. (e + 1) * order()).
//
// The constructor checks every coordinate against dims and rejects duplicate
// index tuples, so a constructed tensor always satisfies both invariants.
class SparseTensor {
 public:
  SparseTensor() = default;
  SparseTensor(std::vector<std::size_t> dims, std::vector<Index> coords,
               std::vector<double> values);

  std::size_t order() const { return dims_.size(); }
  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t dim(std::size_t mode) const { return dims_[mode]; }
  std::size_t nnz() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::span<const Index> index(std::size_t entry) const {
    return {coords_.data() + entry * order(), order()};
  }
  Index coord(std::size_t entry, std::size_t mode) const {
    return coords_[entry * order() + mode];
  }
  double value(std::size_t entry) const { return values_[entry]; }

  const std::vector<Index>& coords() const { return coords_; }
  const std::vector<double>& values() const { return values_; }

  // Builds a tensor holding only the listed entries, in the listed order.
  SparseTensor subset(std::span<const std::size_t> entries) const;

  // Same entries, different mode sizes (each must still cover the coords).
  SparseTensor with_dims(std::vector<std::size_t> dims) const;

 private:
  std::vector<std::size_t> dims_;
  std::vector<Index> coords_;
  std::vector<double> values_;
};

// Group membership of the entities along the sensitive mode.
class SensitiveContext {
 public:
  SensitiveContext() = default;
  SensitiveContext(std::size_t sensitive_mode, std::vector<int> group_of,
                   std::vector<std::string> group_names);

  std::size_t sensitive_mode() const { return sensitive_mode_; }
  std::size_t num_entities() const { return group_of_.size(); }
  int num_groups() const { return static_cast<int>(group_names_.size()); }
  int group_of(std::size_t entity) const { return group_of_.at(entity); }
  const std::vector<int>& groups() const { return group_of_; }
  const std::vector<std::string>& group_names() const { return group_names_; }

  // Row of the one-hot feature matrix F for one entity.
  std::vector<double> one_hot(std::size_t entity) const;

  int group_of_entry(const SparseTensor& t, std::size_t entry) const {
    return group_of_[t.coord(entry, sensitive_mode_)];
  }

  // Context covering appended entities; extra_originals[k] is the original
  // entity whose group the k-th appended entity inherits.
  SensitiveContext extended(std::span<const std::size_t> extra_originals) const;

 private:
  std::size_t sensitive_mode_ = 0;
  std::vector<int> group_of_;
  std::vector<std::string> group_names_;
};

struct DataSplit {
  SparseTensor train;
  SparseTensor validation;
  SparseTensor test;
};

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

SparseTensor load_tensor(const std::filesystem::path& path,
                         std::optional<std::vector<std::size_t>> dims = {});
SparseTensor parse_tensor(std::istream& in,
                          std::optional<std::vector<std::size_t>> dims = {});

// Writes one entry per line with 17 significant digits so that load_tensor
// reproduces every value exactly.
void save_tensor(const SparseTensor& tensor, const std::filesystem::path& path);
void write_tensor(const SparseTensor& tensor, std::ostream& out);

SensitiveContext load_sensitive(const std::filesystem::path& path,
                                std::size_t num_entities,
                                std::size_t sensitive_mode = 0);
SensitiveContext parse_sensitive(std::istream& in, std::size_t num_entities,
                                 std::size_t sensitive_mode = 0);
void save_sensitive(const SensitiveContext& ctx,
                    const std::filesystem::path& path);

// Shuffles with a seeded engine, then cuts floor(n * train) and
// floor(n * validation) entries; the remainder goes to test.
DataSplit split(const SparseTensor& tensor, const SplitRatios& ratios,
                std::uint64_t seed);

// Group with the fewest observed entries; ties go to the lower group id.
int minority_group(const SparseTensor& tensor, const SensitiveContext& ctx);

// Keeps ceil(keep_rate * m) of the m minority entries, chosen by a seeded
// shuffle. Majority entries and the relative entry order are preserved.
SparseTensor downsample_minority(const SparseTensor& tensor,
                                 const SensitiveContext& ctx, double keep_rate,
                                 std::uint64_t seed);

// Entry ids grouped by their coordinate along `mode`.
std::vector<std::vector<std::size_t>> entries_by_slice(
    const SparseTensor& tensor, std::size_t mode);

}  // namespace fairtc
