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
#include "fairtc/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "fairtc/error.hpp"

namespace fairtc {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

std::mt19937_64 entity_rng(std::uint64_t seed, std::size_t entity) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(entity), static_cast<std::uint32_t>(entity >> 32)};
  return std::mt19937_64(seq);
}

std::vector<Index> reindexed(const SparseTensor& t, std::size_t entry, std::size_t mode,
                             std::size_t new_coord) {
  auto idx = t.index(entry);
  std::vector<Index> out(idx.begin(), idx.end());
  out[mode] = static_cast<Index>(new_coord);
  return out;
}

std::vector<std::size_t> select_targets(const std::vector<std::vector<std::size_t>>& by_entity,
                                        TargetRule rule) {
  std::vector<std::size_t> targets;
  if (rule == TargetRule::kAll) {
    for (std::size_t i = 0; i < by_entity.size(); ++i) targets.push_back(i);
    return targets;
  }
  std::vector<std::size_t> counts;
  for (const auto& v : by_entity) counts.push_back(v.size());
  auto mid = counts.begin() + counts.size() / 2;
  std::nth_element(counts.begin(), mid, counts.end());
  const std::size_t median = *mid;
  for (std::size_t i = 0; i < by_entity.size(); ++i) {
    if (by_entity[i].size() < median) targets.push_back(i);
  }
  return targets;
}

}  // namespace

std::string to_string(TargetRule rule) {
  return rule == TargetRule::kAll ? "all" : "below_median";
}

TargetRule parse_target_rule(const std::string& name) {
  if (name == "all") return TargetRule::kAll;
  if (name == "below_median") return TargetRule::kBelowMedian;
  throw ConfigError("unknown augmentation target rule '" + name + "'");
}

FairGraph build_graph(std::span<const double> factor, std::size_t rank,
                      const SensitiveContext& ctx, std::size_t k, double gamma) {
  const std::size_t n = ctx.num_entities();
  if (rank == 0 || factor.size() != n * rank) {
    throw ArgumentError("sensitive factor shape does not match the context");
  }
  if (k == 0 || k >= n) throw ArgumentError("K must satisfy 0 < K < number of entities");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ArgumentError("gamma must lie in [0, 1]");

  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto u = factor.subspan(i * rank, rank);
    norms[i] = std::sqrt(dot(u, u));
    if (!(norms[i] > 0.0)) {
      throw ArgumentError("sensitive entity " + std::to_string(i) +
                          " has a zero factor row; cosine similarity is undefined");
    }
  }
  std::vector<std::vector<double>> features(n);
  std::vector<double> feature_norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    features[i] = ctx.one_hot(i);
    feature_norms[i] = std::sqrt(dot(features[i], features[i]));
  }

  FairGraph graph{k, gamma, std::vector<std::vector<Neighbor>>(n)};
  std::vector<Neighbor> cand;
  cand.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    const auto ui = factor.subspan(i * rank, rank);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double s_f = dot(ui, factor.subspan(j * rank, rank)) / (norms[i] * norms[j]);
      const double s_g =
          1.0 - dot(features[i], features[j]) / (feature_norms[i] * feature_norms[j]);
      cand.push_back({j, gamma * s_f + (1.0 - gamma) * s_g});
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end(),
                      [](const Neighbor& a, const Neighbor& b) {
                        return a.score != b.score ? a.score > b.score : a.id < b.id;
                      });
    graph.neighbors[i].assign(cand.begin(), cand.begin() + k);
  }
  return graph;
}

std::vector<CouplingPair> AugmentedTensor::pairs() const {
  std::vector<CouplingPair> out;
  out.reserve(entities.size());
  for (const auto& e : entities) out.push_back({e.original, e.augmented});
  return out;
}

std::vector<std::size_t> AugmentedTensor::originals() const {
  std::vector<std::size_t> out;
  out.reserve(entities.size());
  for (const auto& e : entities) out.push_back(e.original);
  return out;
}

std::vector<double> neighborhood_row(const FactorModel& pretrained, std::size_t sensitive_mode,
                                     std::size_t entity, std::span<const Neighbor> neighbors) {
  const auto own = pretrained.row(sensitive_mode, entity);
  std::vector<double> avg(own.begin(), own.end());
  for (const auto& nb : neighbors) {
    const auto u = pretrained.row(sensitive_mode, nb.id);
    for (std::size_t r = 0; r < avg.size(); ++r) avg[r] += u[r];
  }
  const double inv = 1.0 / static_cast<double>(neighbors.size() + 1);
  for (double& v : avg) v *= inv;
  return avg;
}

AugmentedTensor generate_entries(const SparseTensor& train, const FairGraph& graph,
                                 const FactorModel& pretrained, const SensitiveContext& ctx,
                                 const AugmentOptions& options) {
  const std::size_t s = ctx.sensitive_mode();
  if (pretrained.dims() != train.dims()) {
    throw ArgumentError("pretrained model dims do not match the training tensor");
  }
  if (ctx.num_entities() != train.dim(s) || graph.neighbors.size() != train.dim(s)) {
    throw ArgumentError("graph and context must cover every sensitive entity");
  }

  const auto by_entity = entries_by_slice(train, s);
  const auto targets = select_targets(by_entity, options.targets);
  const std::size_t base = train.dim(s);

  AugmentedTensor out;
  out.sensitive_mode = s;
  out.original_dim = base;
  std::vector<Index> coords;
  std::vector<double> values;

  for (std::size_t t = 0; t < targets.size(); ++t) {
    const std::size_t entity = targets[t];
    const std::size_t aug_id = base + t;
    AugmentedEntity info{entity, aug_id, 0, 0, 0};
    auto rng = entity_rng(options.seed, entity);
    std::set<std::vector<Index>> taken;

    auto emit = [&](std::vector<Index> idx, double value, AugmentSource src, std::size_t from) {
      coords.insert(coords.end(), idx.begin(), idx.end());
      values.push_back(value);
      out.source.push_back(src);
      out.source_entry.push_back(from);
    };

    std::vector<std::size_t> own = by_entity[entity];
    std::shuffle(own.begin(), own.end(), rng);
    own.resize(std::min(options.p, own.size()));
    for (std::size_t e : own) {
      auto idx = reindexed(train, e, s, aug_id);
      taken.insert(idx);
      emit(std::move(idx), train.value(e), AugmentSource::kOriginal, e);
      ++info.from_original;
    }

    const auto& nbs = graph.neighbors[entity];
    std::vector<std::size_t> pool;
    for (const auto& nb : nbs) {
      pool.insert(pool.end(), by_entity[nb.id].begin(), by_entity[nb.id].end());
    }
    if (by_entity[entity].empty() && pool.empty()) {
      out.warnings.push_back("entity " + std::to_string(entity) +
                             " has no observed entries and no neighbor entries; nothing sampled");
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(std::min(options.q, pool.size()));

    if (!pool.empty()) {
      const auto avg = neighborhood_row(pretrained, s, entity, nbs);
      std::vector<std::span<const double>> rows(train.order());
      for (std::size_t e : pool) {
        auto idx = reindexed(train, e, s, aug_id);
        if (!taken.insert(idx).second) {
          ++info.dropped;
          continue;
        }
        for (std::size_t n = 0; n < train.order(); ++n) {
          rows[n] = n == s ? std::span<const double>(avg) : pretrained.row(n, train.coord(e, n));
        }
        emit(std::move(idx), predict_generic(pretrained, rows), AugmentSource::kNeighbor, e);
        ++info.from_neighbors;
      }
    }
    out.entities.push_back(info);
  }

  std::vector<std::size_t> dims = train.dims();
  dims[s] = base + targets.size();
  out.entries = SparseTensor(std::move(dims), std::move(coords), std::move(values));
  return out;
}

AssembledTensor assemble(const SparseTensor& train, const AugmentedTensor& aug) {
  const std::size_t s = aug.sensitive_mode;
  if (train.dim(s) != aug.original_dim || aug.entries.order() != train.order()) {
    throw ArgumentError("augmented tensor does not belong to this training tensor");
  }
  std::vector<Index> coords = train.coords();
  std::vector<double> values = train.values();
  for (std::size_t e = 0; e < aug.entries.nnz(); ++e) {
    if (aug.entries.coord(e, s) < aug.original_dim) {
      throw std::logic_error("augmented entry falls inside the original entity range");
    }
  }
  coords.insert(coords.end(), aug.entries.coords().begin(), aug.entries.coords().end());
  values.insert(values.end(), aug.entries.values().begin(), aug.entries.values().end());
  std::vector<std::size_t> dims = train.dims();
  dims[s] = aug.original_dim + aug.entities.size();
  return {SparseTensor(std::move(dims), std::move(coords), std::move(values)), aug.pairs()};
}

SensitiveContext augmented_context(const SensitiveContext& ctx, const AugmentedTensor& aug) {
  return ctx.extended(aug.originals());
}

SparseTensor random_augment(const SparseTensor& train, const FactorModel& pretrained,
                            std::size_t count, std::uint64_t seed) {
  if (pretrained.dims() != train.dims()) {
    throw ArgumentError("pretrained model dims do not match the training tensor");
  }
  std::set<std::vector<Index>> taken;
  for (std::size_t e = 0; e < train.nnz(); ++e) {
    auto idx = train.index(e);
    taken.emplace(idx.begin(), idx.end());
  }
  double cells = 1.0;
  for (std::size_t d : train.dims()) cells *= static_cast<double>(d);
  const double free_cells = cells - static_cast<double>(train.nnz());
  count = static_cast<std::size_t>(std::min(static_cast<double>(count), free_cells));

  std::mt19937_64 rng(seed);
  std::vector<Index> coords = train.coords();
  std::vector<double> values = train.values();
  std::vector<Index> idx(train.order());
  for (std::size_t added = 0; added < count;) {
    for (std::size_t n = 0; n < idx.size(); ++n) {
      idx[n] = static_cast<Index>(std::uniform_int_distribution<std::size_t>(0, train.dim(n) - 1)(rng));
    }
    if (!taken.insert(idx).second) continue;
    coords.insert(coords.end(), idx.begin(), idx.end());
    values.push_back(predict(pretrained, idx));
    ++added;
  }
  return SparseTensor(train.dims(), std::move(coords), std::move(values));
}

void save_augmented(const AugmentedTensor& aug, const std::filesystem::path& tensor_path,
                    const std::filesystem::path& pairs_path) {
  save_tensor(aug.entries, tensor_path);
  std::ofstream out(pairs_path);
  if (!out) throw std::runtime_error("cannot write pair file " + pairs_path.string());
  for (const auto& e : aug.entities) out << e.original << '\t' << e.augmented << '\n';
}

}  // namespace fairtc
