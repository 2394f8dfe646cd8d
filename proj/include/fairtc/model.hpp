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
#include <span>
#include <string>
#include <vector>

#include "fairtc/tensor.hpp"

namespace fairtc {

enum class ModelKind { kCp, kCostco };
enum class Activation { kRelu, kLinear };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);
std::string to_string(Activation act);
Activation parse_activation(const std::string& name);

// Shape of the CoSTCo network. The first convolution mixes the N stacked rows
// per latent column into `channels` feature rows; the second collapses the R
// columns; an MLP with one hidden layer maps the result to a scalar.
struct CostcoConfig {
  std::size_t channels = 8;
  std::size_t hidden = 32;
  Activation activation = Activation::kRelu;

  bool operator==(const CostcoConfig&) const = default;
};

// Offsets of the CoSTCo weight blocks inside the theta region.
//   conv1_w [C][N]     conv1_b [C]
//   conv2_w [C][C][R]  conv2_b [C]
//   mlp_w   [H][C]     mlp_b   [H]
//   out_w   [H]        out_b   [1]
struct CostcoLayout {
  std::size_t conv1_w, conv1_b, conv2_w, conv2_b, mlp_w, mlp_b, out_w, out_b;
  std::size_t size;

  bool operator==(const CostcoLayout&) const = default;
};

// Factor matrices plus (for CoSTCo) network weights, all held in one flat
// parameter vector. Factor n is a row-major dims[n] x rank block.
class FactorModel {
 public:
  FactorModel() = default;
  FactorModel(ModelKind kind, std::vector<std::size_t> dims, std::size_t rank,
              CostcoConfig costco = {});

  ModelKind kind() const { return kind_; }
  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t order() const { return dims_.size(); }
  std::size_t rank() const { return rank_; }
  const CostcoConfig& costco() const { return costco_; }
  const CostcoLayout& layout() const { return layout_; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t num_params() const { return params_.size(); }

  std::size_t factor_offset(std::size_t mode) const { return factor_offsets_[mode]; }
  std::size_t row_offset(std::size_t mode, std::size_t i) const {
    return factor_offsets_[mode] + i * rank_;
  }
  std::span<const double> row(std::size_t mode, std::size_t i) const {
    return {params_.data() + row_offset(mode, i), rank_};
  }
  std::span<double> row(std::size_t mode, std::size_t i) {
    return {params_.data() + row_offset(mode, i), rank_};
  }
  std::span<const double> factor(std::size_t mode) const {
    return {params_.data() + factor_offsets_[mode], dims_[mode] * rank_};
  }

  // Everything after the factor blocks; empty for CP.
  std::size_t theta_offset() const { return theta_offset_; }
  std::size_t theta_size() const { return params_.size() - theta_offset_; }
  std::span<const double> theta() const {
    return std::span<const double>(params_).subspan(theta_offset_);
  }
  std::span<double> theta() { return std::span<double>(params_).subspan(theta_offset_); }

  bool all_finite() const;

  // Copy of this model with `count` rows appended to factor `mode`; the new
  // rows are drawn uniform(-scale, scale) from their own seeded stream so the
  // existing parameters are untouched.
  FactorModel with_extra_rows(std::size_t mode, std::size_t count, double scale,
                              std::uint64_t seed) const;

  bool operator==(const FactorModel&) const = default;

 private:
  ModelKind kind_ = ModelKind::kCp;
  std::vector<std::size_t> dims_;
  std::size_t rank_ = 0;
  CostcoConfig costco_;
  CostcoLayout layout_{};
  std::vector<std::size_t> factor_offsets_;
  std::size_t theta_offset_ = 0;
  std::vector<double> params_;
};

using RowSet = std::span<const std::span<const double>>;

// The N factor rows selected by `index`. Throws BoundsError on a bad index.
std::vector<std::span<const double>> select_rows(const FactorModel& model,
                                                 std::span<const Index> index);

double predict_cp(const FactorModel& model, std::span<const Index> index);
double predict_costco(const FactorModel& model, std::span<const Index> index);
double predict(const FactorModel& model, std::span<const Index> index);

// Evaluates the reconstruction on caller-supplied rows instead of rows looked
// up from the factors.
double predict_generic(const FactorModel& model, RowSet rows);

// Computes the prediction for `rows` together with its unscaled derivative
// with respect to every row entry (row_grad, N*R, row-major) and every theta
// entry (theta_grad, theta_size()). Both outputs are overwritten.
double value_and_gradient(const FactorModel& model, RowSet rows,
                          std::span<double> row_grad,
                          std::span<double> theta_grad);

// Gradient of (prediction - x)^2 given residual = prediction - x, restricted
// to the parameters the entry touches.
struct EntryGradient {
  std::vector<std::vector<double>> rows;  // one per mode, length R
  std::vector<double> theta;              // empty for CP
};
EntryGradient gradients(const FactorModel& model, std::span<const Index> index,
                        double residual);

// Reusable buffers for scattering per-entry derivatives into a dense
// gradient laid out like model.params().
class GradientScatter {
 public:
  explicit GradientScatter(const FactorModel& model);

  // Evaluates the entry and keeps its derivatives; returns the prediction.
  double compute(const FactorModel& model, std::span<const Index> index);

  // Adds scale * (derivatives from the last compute) into `grad`.
  void scatter(const FactorModel& model, std::span<const Index> index,
               double scale, std::span<double> grad) const;

  double add(const FactorModel& model, std::span<const Index> index,
             double scale, std::span<double> grad) {
    const double y = compute(model, index);
    scatter(model, index, scale, grad);
    return y;
  }

 private:
  std::vector<double> row_grad_;
  std::vector<double> theta_grad_;
};

FactorModel init_model(ModelKind kind, std::vector<std::size_t> dims,
                       std::size_t rank, double scale, std::uint64_t seed,
                       CostcoConfig costco = {});

void save_model(const FactorModel& model, const std::filesystem::path& path);
FactorModel load_model(const std::filesystem::path& path);
void write_model(const FactorModel& model, std::ostream& out);
FactorModel read_model(std::istream& in);

}  // namespace fairtc
