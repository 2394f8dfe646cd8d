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

// Shared fixtures and brute-force oracles for the test binaries. Everything
// here is written against the public API only and recomputes results the
// slow, obvious way.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "fairtc/augmentation.hpp"
#include "fairtc/model.hpp"
#include "fairtc/tensor.hpp"

namespace fairtc::testing {

inline SparseTensor random_tensor(const std::vector<std::size_t>& dims, std::size_t nnz,
                                  std::mt19937_64& rng) {
  std::set<std::vector<Index>> seen;
  std::vector<Index> coords;
  std::vector<double> values;
  std::normal_distribution<double> val(0.0, 1.0);
  std::vector<Index> idx(dims.size());
  while (seen.size() < nnz) {
    for (std::size_t n = 0; n < dims.size(); ++n) {
      idx[n] = static_cast<Index>(std::uniform_int_distribution<std::size_t>(0, dims[n] - 1)(rng));
    }
    if (!seen.insert(idx).second) continue;
    coords.insert(coords.end(), idx.begin(), idx.end());
    values.push_back(val(rng));
  }
  return SparseTensor(dims, std::move(coords), std::move(values));
}

// Entities alternate between two groups, so both are always present.
inline SensitiveContext two_groups(std::size_t entities, std::size_t mode = 0) {
  std::vector<int> g(entities);
  for (std::size_t i = 0; i < entities; ++i) g[i] = static_cast<int>(i % 2);
  return SensitiveContext(mode, std::move(g), {"a", "b"});
}

// init_model followed by a perturbation of every parameter so biases are
// nonzero and ReLU units sit away from their kinks.
inline FactorModel random_model(ModelKind kind, const std::vector<std::size_t>& dims,
                                std::size_t rank, std::mt19937_64& rng,
                                CostcoConfig costco = {}) {
  FactorModel m = init_model(kind, dims, rank, 1.0, rng(), costco);
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  for (double& p : m.params()) p += jitter(rng);
  return m;
}

inline double naive_cp(const FactorModel& m, std::span<const Index> idx) {
  double total = 0.0;
  for (std::size_t r = 0; r < m.rank(); ++r) {
    double term = 1.0;
    for (std::size_t n = 0; n < m.order(); ++n) term *= m.params()[m.factor_offset(n) + idx[n] * m.rank() + r];
    total += term;
  }
  return total;
}

inline double naive_costco_rows(const FactorModel& m,
                                const std::vector<std::vector<double>>& rows) {
  const std::size_t N = m.order(), R = m.rank();
  const std::size_t C = m.costco().channels, H = m.costco().hidden;
  const auto th = m.theta();
  const auto& l = m.layout();
  auto act = [&](double x) {
    return m.costco().activation == Activation::kRelu ? std::max(0.0, x) : x;
  };
  std::vector<std::vector<double>> z1(C, std::vector<double>(R));
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t r = 0; r < R; ++r) {
      double a = th[l.conv1_b + c];
      for (std::size_t n = 0; n < N; ++n) a += th[l.conv1_w + c * N + n] * rows[n][r];
      z1[c][r] = act(a);
    }
  std::vector<double> z2(C);
  for (std::size_t d = 0; d < C; ++d) {
    double a = th[l.conv2_b + d];
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t r = 0; r < R; ++r) a += th[l.conv2_w + (d * C + c) * R + r] * z1[c][r];
    z2[d] = act(a);
  }
  double out = th[l.out_b];
  for (std::size_t h = 0; h < H; ++h) {
    double a = th[l.mlp_b + h];
    for (std::size_t d = 0; d < C; ++d) a += th[l.mlp_w + h * C + d] * z2[d];
    out += th[l.out_w + h] * act(a);
  }
  return out;
}

inline double naive_costco(const FactorModel& m, std::span<const Index> idx) {
  std::vector<std::vector<double>> rows;
  for (std::size_t n = 0; n < m.order(); ++n) {
    auto r = m.row(n, idx[n]);
    rows.emplace_back(r.begin(), r.end());
  }
  return naive_costco_rows(m, rows);
}

// Central differences of f over every parameter of `model`.
inline std::vector<double> numeric_gradient(FactorModel model,
                                            const std::function<double(const FactorModel&)>& f,
                                            double h = 1e-5) {
  std::vector<double> g(model.num_params());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double orig = model.params()[k];
    model.params()[k] = orig + h;
    const double up = f(model);
    model.params()[k] = orig - h;
    const double down = f(model);
    model.params()[k] = orig;
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

// ||a - b|| / max(||a||, ||b||); 0 when both vanish.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    diff += (a[k] - b[k]) * (a[k] - b[k]);
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  const double scale = std::sqrt(std::max(na, nb));
  if (scale < 1e-12) return std::sqrt(diff);
  return std::sqrt(diff) / scale;
}

inline std::vector<std::vector<Neighbor>> oracle_graph(std::span<const double> factor,
                                                       std::size_t rank,
                                                       const SensitiveContext& ctx,
                                                       std::size_t k, double gamma) {
  const std::size_t n = ctx.num_entities();
  auto cosine = [](const std::vector<double>& a, const std::vector<double>& b) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t r = 0; r < a.size(); ++r) {
      ab += a[r] * b[r];
      aa += a[r] * a[r];
      bb += b[r] * b[r];
    }
    return ab / (std::sqrt(aa) * std::sqrt(bb));
  };
  std::vector<std::vector<double>> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i].assign(factor.begin() + i * rank, factor.begin() + (i + 1) * rank);
  std::vector<std::vector<Neighbor>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Neighbor> all;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      all.push_back({j, gamma * cosine(u[i], u[j]) +
                            (1.0 - gamma) * (1.0 - cosine(ctx.one_hot(i), ctx.one_hot(j)))});
    }
    std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.id < b.id;
    });
    all.resize(k);
    out[i] = all;
  }
  return out;
}

}  // namespace fairtc::testing
