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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "fairtc/error.hpp"
#include "fairtc/model.hpp"
#include "support.hpp"

namespace fairtc {
namespace {

using testing::naive_costco;
using testing::naive_cp;
using testing::numeric_gradient;
using testing::random_model;
using testing::relative_error;

void set_rows(FactorModel& m, std::initializer_list<std::vector<double>> rows) {
  std::size_t n = 0;
  for (const auto& r : rows) {
    std::copy(r.begin(), r.end(), m.row(n++, 0).begin());
  }
}

std::vector<Index> random_index(const FactorModel& m, std::mt19937_64& rng) {
  std::vector<Index> idx(m.order());
  for (std::size_t n = 0; n < m.order(); ++n) idx[n] = static_cast<Index>(rng() % m.dims()[n]);
  return idx;
}

std::vector<double> flatten(const FactorModel& m, std::span<const Index> idx,
                            const EntryGradient& g) {
  std::vector<double> out(m.num_params(), 0.0);
  for (std::size_t n = 0; n < m.order(); ++n) {
    for (std::size_t r = 0; r < m.rank(); ++r) out[m.row_offset(n, idx[n]) + r] += g.rows[n][r];
  }
  for (std::size_t k = 0; k < g.theta.size(); ++k) out[m.theta_offset() + k] += g.theta[k];
  return out;
}

TEST(PredictCp, ScalarRowsMultiply) {
  FactorModel m(ModelKind::kCp, {1, 1, 1}, 1);
  set_rows(m, {{2}, {2}, {2}});
  const std::vector<Index> idx{0, 0, 0};
  EXPECT_EQ(predict_cp(m, idx), 8.0);
}

TEST(PredictCp, OrthogonalRanksCancel) {
  FactorModel m(ModelKind::kCp, {1, 1, 1}, 2);
  set_rows(m, {{1, 0}, {1, 0}, {0, 1}});
  const std::vector<Index> idx{0, 0, 0};
  EXPECT_EQ(predict_cp(m, idx), 0.0);
}

TEST(PredictCp, MatchesNaiveLoop) {
  std::mt19937_64 rng(3);
  const auto m = random_model(ModelKind::kCp, {4, 5, 6}, 3, rng);
  for (int k = 0; k < 200; ++k) {
    const auto idx = random_index(m, rng);
    EXPECT_NEAR(predict_cp(m, idx), naive_cp(m, idx), 1e-12);
  }
}

TEST(PredictCp, OutOfBoundsIndex) {
  const auto m = init_model(ModelKind::kCp, {2, 2}, 2, 0.1, 0);
  const std::vector<Index> idx{0, 2};
  EXPECT_THROW(predict_cp(m, idx), BoundsError);
  EXPECT_THROW(predict(m, idx), BoundsError);
}

TEST(PredictCp, MultilinearInEachRow) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    auto m = random_model(ModelKind::kCp, {3, 4, 2}, 3, rng);
    const auto idx = random_index(m, rng);
    const std::size_t mode = rng() % 3;
    const double lambda = std::uniform_real_distribution<double>(-3, 3)(rng);
    const double before = predict_cp(m, idx);
    for (double& v : m.row(mode, idx[mode])) v *= lambda;
    EXPECT_NEAR(predict_cp(m, idx), lambda * before, 1e-12 * (1 + std::abs(before)));
  }
}

TEST(PredictCostco, ZeroNetworkGivesZero) {
  auto m = init_model(ModelKind::kCostco, {3, 3, 3}, 2, 0.5, 1);
  for (double& p : m.theta()) p = 0.0;
  const std::vector<Index> idx{1, 2, 0};
  EXPECT_EQ(predict_costco(m, idx), 0.0);
}

TEST(PredictCostco, IdentityConfigurationSumsRows) {
  CostcoConfig cfg{1, 1, Activation::kLinear};
  std::mt19937_64 rng(21);
  auto m = random_model(ModelKind::kCostco, {3, 4, 2}, 3, rng, cfg);
  const auto& l = m.layout();
  auto th = m.theta();
  std::fill(th.begin(), th.end(), 0.0);
  for (std::size_t n = 0; n < 3; ++n) th[l.conv1_w + n] = 1.0;
  for (std::size_t r = 0; r < 3; ++r) th[l.conv2_w + r] = 1.0;
  th[l.mlp_w] = 1.0;
  th[l.out_w] = 1.0;
  const std::vector<Index> idx{2, 1, 1};
  double sum = 0.0;
  for (std::size_t n = 0; n < 3; ++n)
    for (double v : m.row(n, idx[n])) sum += v;
  EXPECT_NEAR(predict_costco(m, idx), sum, 1e-12);
}

TEST(PredictCostco, MatchesNaiveForward) {
  std::mt19937_64 rng(5);
  for (const auto act : {Activation::kRelu, Activation::kLinear}) {
    const auto m = random_model(ModelKind::kCostco, {3, 5, 4}, 4, rng, {3, 6, act});
    for (int k = 0; k < 100; ++k) {
      const auto idx = random_index(m, rng);
      EXPECT_NEAR(predict_costco(m, idx), naive_costco(m, idx), 1e-12);
    }
  }
}

TEST(PredictCostco, RepeatableAndKindChecked) {
  std::mt19937_64 rng(6);
  const auto m = random_model(ModelKind::kCostco, {3, 3}, 2, rng);
  const std::vector<Index> idx{1, 2};
  const double a = predict_costco(m, idx);
  EXPECT_EQ(predict_costco(m, idx), a);
  const auto cp = init_model(ModelKind::kCp, {3, 3}, 2, 0.1, 0);
  EXPECT_THROW(predict_costco(cp, idx), ConfigError);
  EXPECT_THROW(predict_cp(m, idx), ConfigError);
}

TEST(PredictGeneric, AgreesWithIndexedPrediction) {
  std::mt19937_64 rng(9);
  for (const auto kind : {ModelKind::kCp, ModelKind::kCostco}) {
    const auto m = random_model(kind, {4, 3, 5}, 3, rng);
    for (int k = 0; k < 1000; ++k) {
      const auto idx = random_index(m, rng);
      const auto rows = select_rows(m, idx);
      EXPECT_EQ(predict_generic(m, rows), predict(m, idx));
    }
  }
}

TEST(PredictGeneric, ZeroRowAnnihilatesCp) {
  std::mt19937_64 rng(10);
  const auto m = random_model(ModelKind::kCp, {4, 3, 5}, 3, rng);
  const std::vector<Index> idx{1, 1, 1};
  auto rows = select_rows(m, idx);
  const std::vector<double> zero(3, 0.0);
  rows[1] = zero;
  EXPECT_EQ(predict_generic(m, rows), 0.0);
}

TEST(PredictGeneric, RowLengthChecked) {
  const auto m = init_model(ModelKind::kCp, {2, 2}, 3, 0.1, 0);
  const std::vector<double> a(3, 1.0), b(2, 1.0);
  std::vector<std::span<const double>> rows{a, b};
  EXPECT_THROW(predict_generic(m, rows), ArgumentError);
}

TEST(Gradients, ProductRuleExample) {
  FactorModel m(ModelKind::kCp, {1, 1}, 1);
  set_rows(m, {{3}, {5}});
  const std::vector<Index> idx{0, 0};
  const auto g = gradients(m, idx, 1.0);
  EXPECT_EQ(g.rows[0][0], 10.0);
  EXPECT_EQ(g.rows[1][0], 6.0);
  const auto zero = gradients(m, idx, 0.0);
  EXPECT_EQ(zero.rows[0][0], 0.0);
  EXPECT_EQ(zero.rows[1][0], 0.0);
}

TEST(Gradients, ZeroResidualZerosEverything) {
  std::mt19937_64 rng(12);
  const auto m = random_model(ModelKind::kCostco, {3, 3, 3}, 2, rng);
  const std::vector<Index> idx{0, 1, 2};
  const auto g = gradients(m, idx, 0.0);
  for (const auto& r : g.rows)
    for (double v : r) EXPECT_EQ(v, 0.0);
  for (double v : g.theta) EXPECT_EQ(v, 0.0);
}

// d/dθ (f - x)^2 for one entry equals gradients(model, idx, f - x).
TEST(Gradients, MatchFiniteDifferences) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const auto kind = trial % 2 ? ModelKind::kCostco : ModelKind::kCp;
    const std::size_t order = 2 + rng() % 3;
    std::vector<std::size_t> dims(order);
    for (auto& d : dims) d = 1 + rng() % 6;
    const std::size_t rank = 1 + rng() % 4;
    const auto m = random_model(kind, dims, rank, rng, {1 + rng() % 4, 1 + rng() % 6});
    const auto idx = random_index(m, rng);
    const double target = std::normal_distribution<double>()(rng);
    auto loss = [&](const FactorModel& x) {
      const double r = predict(x, idx) - target;
      return r * r;
    };
    const auto analytic = flatten(m, idx, gradients(m, idx, predict(m, idx) - target));
    const auto numeric = numeric_gradient(m, loss);
    EXPECT_LT(relative_error(analytic, numeric), 1e-4) << "trial " << trial;

    std::vector<double> scattered(m.num_params(), 0.0);
    GradientScatter gs(m);
    const double y = gs.add(m, idx, 2.0 * (predict(m, idx) - target), scattered);
    EXPECT_EQ(y, predict(m, idx));
    EXPECT_LT(relative_error(scattered, analytic), 1e-12);
  }
}

TEST(InitModel, DeterministicAndInRange) {
  const auto a = init_model(ModelKind::kCp, {5, 6, 7}, 4, 0.1, 42);
  const auto b = init_model(ModelKind::kCp, {5, 6, 7}, 4, 0.1, 42);
  const auto c = init_model(ModelKind::kCp, {5, 6, 7}, 4, 0.1, 43);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
  for (double v : a.params()) {
    EXPECT_GT(v, -0.1);
    EXPECT_LT(v, 0.1);
  }
  const auto net = init_model(ModelKind::kCostco, {5, 6, 7}, 4, 0.1, 42);
  EXPECT_EQ(net.theta_size(), net.layout().size);
  for (std::size_t n = 0; n < 3; ++n)
    for (double v : net.factor(n)) EXPECT_LT(std::abs(v), 0.1);
  EXPECT_TRUE(net.all_finite());
}

TEST(InitModel, LayoutShapesConsistent) {
  const auto m = init_model(ModelKind::kCostco, {2, 3, 4, 5}, 3, 0.1, 0, {5, 7});
  const auto& l = m.layout();
  EXPECT_EQ(l.conv1_b - l.conv1_w, 5u * 4u);
  EXPECT_EQ(l.conv2_w - l.conv1_b, 5u);
  EXPECT_EQ(l.conv2_b - l.conv2_w, 5u * 5u * 3u);
  EXPECT_EQ(l.mlp_w - l.conv2_b, 5u);
  EXPECT_EQ(l.mlp_b - l.mlp_w, 7u * 5u);
  EXPECT_EQ(l.out_w - l.mlp_b, 7u);
  EXPECT_EQ(l.out_b - l.out_w, 7u);
  EXPECT_EQ(l.size, l.out_b + 1);
}

TEST(InitModel, ExtraRowsLeaveExistingParameters) {
  const auto m = init_model(ModelKind::kCostco, {4, 3}, 2, 0.1, 7);
  const auto big = m.with_extra_rows(0, 3, 0.1, 99);
  EXPECT_EQ(big.dims(), (std::vector<std::size_t>{7, 3}));
  for (std::size_t i = 0; i < 4; ++i) {
    const auto a = m.row(0, i), b = big.row(0, i);
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const auto a = m.row(1, i), b = big.row(1, i);
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
  EXPECT_TRUE(std::equal(m.theta().begin(), m.theta().end(), big.theta().begin()));
}

TEST(Checkpoint, RoundTripIsIdentity) {
  std::mt19937_64 rng(14);
  for (const auto kind : {ModelKind::kCp, ModelKind::kCostco}) {
    const auto m = random_model(kind, {3, 4, 5}, 3, rng, {4, 5, Activation::kLinear});
    std::stringstream buf;
    write_model(m, buf);
    const auto back = read_model(buf);
    EXPECT_TRUE(back == m);
  }
}

TEST(Checkpoint, RejectsGarbage) {
  std::istringstream in("not a model\n");
  EXPECT_ANY_THROW(read_model(in));
}

}  // namespace
}  // namespace fairtc
