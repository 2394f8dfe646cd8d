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
#include "fairtc/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "fairtc/error.hpp"

namespace fairtc {
namespace {

constexpr const char* kCheckpointMagic = "fairtc-model";
constexpr int kCheckpointVersion = 1;

CostcoLayout make_layout(std::size_t order, std::size_t rank, const CostcoConfig& cfg) {
  const std::size_t c = cfg.channels, h = cfg.hidden;
  CostcoLayout l{};
  std::size_t off = 0;
  l.conv1_w = off; off += c * order;
  l.conv1_b = off; off += c;
  l.conv2_w = off; off += c * c * rank;
  l.conv2_b = off; off += c;
  l.mlp_w = off;   off += h * c;
  l.mlp_b = off;   off += h;
  l.out_w = off;   off += h;
  l.out_b = off;   off += 1;
  l.size = off;
  return l;
}

inline double activate(Activation act, double x) {
  return act == Activation::kRelu ? (x > 0.0 ? x : 0.0) : x;
}

inline double activate_grad(Activation act, double pre) {
  return act == Activation::kRelu ? (pre > 0.0 ? 1.0 : 0.0) : 1.0;
}

void check_rows(const FactorModel& model, RowSet rows) {
  if (rows.size() != model.order()) {
    throw ArgumentError("expected " + std::to_string(model.order()) + " rows, got " +
                        std::to_string(rows.size()));
  }
  for (const auto& r : rows) {
    if (r.size() != model.rank()) {
      throw ArgumentError("row length " + std::to_string(r.size()) + " does not match rank " +
                          std::to_string(model.rank()));
    }
  }
}

double cp_value(RowSet rows, std::size_t rank) {
  double sum = 0.0;
  for (std::size_t r = 0; r < rank; ++r) {
    double prod = 1.0;
    for (const auto& row : rows) prod *= row[r];
    sum += prod;
  }
  return sum;
}

// Activations kept for the backward pass.
struct CostcoTrace {
  std::vector<double> pre1, pre2, pre3;  // C*R, C, H
  std::vector<double> h1, h2, h3;
};

double costco_forward(const FactorModel& m, RowSet rows, CostcoTrace& t) {
  const std::size_t n_modes = m.order(), rank = m.rank();
  const std::size_t nc = m.costco().channels, nh = m.costco().hidden;
  const Activation act = m.costco().activation;
  const CostcoLayout& l = m.layout();
  const auto th = m.theta();

  t.pre1.assign(nc * rank, 0.0);
  t.h1.resize(nc * rank);
  for (std::size_t c = 0; c < nc; ++c) {
    for (std::size_t r = 0; r < rank; ++r) {
      double a = th[l.conv1_b + c];
      for (std::size_t n = 0; n < n_modes; ++n) a += th[l.conv1_w + c * n_modes + n] * rows[n][r];
      t.pre1[c * rank + r] = a;
      t.h1[c * rank + r] = activate(act, a);
    }
  }
  t.pre2.assign(nc, 0.0);
  t.h2.resize(nc);
  for (std::size_t d = 0; d < nc; ++d) {
    double a = th[l.conv2_b + d];
    const double* w = &th[l.conv2_w + d * nc * rank];
    for (std::size_t k = 0; k < nc * rank; ++k) a += w[k] * t.h1[k];
    t.pre2[d] = a;
    t.h2[d] = activate(act, a);
  }
  t.pre3.assign(nh, 0.0);
  t.h3.resize(nh);
  double y = th[l.out_b];
  for (std::size_t k = 0; k < nh; ++k) {
    double a = th[l.mlp_b + k];
    for (std::size_t d = 0; d < nc; ++d) a += th[l.mlp_w + k * nc + d] * t.h2[d];
    t.pre3[k] = a;
    t.h3[k] = activate(act, a);
    y += th[l.out_w + k] * t.h3[k];
  }
  return y;
}

void costco_backward(const FactorModel& m, RowSet rows, const CostcoTrace& t,
                     std::span<double> row_grad, std::span<double> theta_grad) {
  const std::size_t n_modes = m.order(), rank = m.rank();
  const std::size_t nc = m.costco().channels, nh = m.costco().hidden;
  const Activation act = m.costco().activation;
  const CostcoLayout& l = m.layout();
  const auto th = m.theta();
  auto g = theta_grad;

  g[l.out_b] = 1.0;
  std::vector<double> g_pre3(nh);
  for (std::size_t k = 0; k < nh; ++k) {
    g[l.out_w + k] = t.h3[k];
    g_pre3[k] = th[l.out_w + k] * activate_grad(act, t.pre3[k]);
    g[l.mlp_b + k] = g_pre3[k];
  }
  std::vector<double> g_pre2(nc, 0.0);
  for (std::size_t k = 0; k < nh; ++k) {
    for (std::size_t d = 0; d < nc; ++d) {
      g[l.mlp_w + k * nc + d] = g_pre3[k] * t.h2[d];
      g_pre2[d] += g_pre3[k] * th[l.mlp_w + k * nc + d];
    }
  }
  for (std::size_t d = 0; d < nc; ++d) {
    g_pre2[d] *= activate_grad(act, t.pre2[d]);
    g[l.conv2_b + d] = g_pre2[d];
  }
  std::vector<double> g_pre1(nc * rank, 0.0);
  for (std::size_t d = 0; d < nc; ++d) {
    const double* w = &th[l.conv2_w + d * nc * rank];
    double* gw = &g[l.conv2_w + d * nc * rank];
    for (std::size_t k = 0; k < nc * rank; ++k) {
      gw[k] = g_pre2[d] * t.h1[k];
      g_pre1[k] += g_pre2[d] * w[k];
    }
  }
  for (std::size_t k = 0; k < nc * rank; ++k) g_pre1[k] *= activate_grad(act, t.pre1[k]);

  std::fill(row_grad.begin(), row_grad.end(), 0.0);
  for (std::size_t c = 0; c < nc; ++c) {
    double gb = 0.0;
    for (std::size_t r = 0; r < rank; ++r) gb += g_pre1[c * rank + r];
    g[l.conv1_b + c] = gb;
    for (std::size_t n = 0; n < n_modes; ++n) {
      const double w = th[l.conv1_w + c * n_modes + n];
      double gw = 0.0;
      for (std::size_t r = 0; r < rank; ++r) {
        gw += g_pre1[c * rank + r] * rows[n][r];
        row_grad[n * rank + r] += g_pre1[c * rank + r] * w;
      }
      g[l.conv1_w + c * n_modes + n] = gw;
    }
  }
}

}  // namespace

std::string to_string(ModelKind kind) { return kind == ModelKind::kCp ? "cp" : "costco"; }

ModelKind parse_model_kind(const std::string& name) {
  if (name == "cp") return ModelKind::kCp;
  if (name == "costco") return ModelKind::kCostco;
  throw ConfigError("unknown model kind '" + name + "' (expected cp or costco)");
}

std::string to_string(Activation act) { return act == Activation::kRelu ? "relu" : "linear"; }

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "linear") return Activation::kLinear;
  throw ConfigError("unknown activation '" + name + "' (expected relu or linear)");
}

FactorModel::FactorModel(ModelKind kind, std::vector<std::size_t> dims, std::size_t rank,
                         CostcoConfig costco)
    : kind_(kind), dims_(std::move(dims)), rank_(rank), costco_(costco) {
  if (dims_.empty()) throw ArgumentError("model needs at least one mode");
  if (rank_ == 0) throw ArgumentError("rank must be positive");
  std::size_t off = 0;
  for (std::size_t d : dims_) {
    factor_offsets_.push_back(off);
    off += d * rank_;
  }
  theta_offset_ = off;
  if (kind_ == ModelKind::kCostco) {
    if (costco_.channels == 0 || costco_.hidden == 0) {
      throw ConfigError("CoSTCo channels and hidden width must be positive");
    }
    layout_ = make_layout(dims_.size(), rank_, costco_);
    off += layout_.size;
  } else {
    costco_ = {};
  }
  params_.assign(off, 0.0);
}

bool FactorModel::all_finite() const {
  return std::all_of(params_.begin(), params_.end(), [](double v) { return std::isfinite(v); });
}

FactorModel FactorModel::with_extra_rows(std::size_t mode, std::size_t count, double scale,
                                         std::uint64_t seed) const {
  if (mode >= order()) throw ArgumentError("with_extra_rows: mode out of range");
  std::vector<std::size_t> new_dims = dims_;
  new_dims[mode] += count;
  FactorModel out(kind_, new_dims, rank_, costco_);

  const std::size_t split_at = factor_offsets_[mode] + dims_[mode] * rank_;
  std::copy(params_.begin(), params_.begin() + split_at, out.params_.begin());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (std::size_t k = 0; k < count * rank_; ++k) out.params_[split_at + k] = dist(rng);
  std::copy(params_.begin() + split_at, params_.end(),
            out.params_.begin() + split_at + count * rank_);
  return out;
}

std::vector<std::span<const double>> select_rows(const FactorModel& model,
                                                 std::span<const Index> index) {
  if (index.size() != model.order()) {
    throw BoundsError("index has " + std::to_string(index.size()) + " coordinates, model has " +
                      std::to_string(model.order()) + " modes");
  }
  std::vector<std::span<const double>> rows;
  rows.reserve(index.size());
  for (std::size_t n = 0; n < index.size(); ++n) {
    if (index[n] >= model.dims()[n]) {
      throw BoundsError("coordinate " + std::to_string(index[n]) + " out of bounds in mode " +
                        std::to_string(n));
    }
    rows.push_back(model.row(n, index[n]));
  }
  return rows;
}

double predict_cp(const FactorModel& model, std::span<const Index> index) {
  if (model.kind() != ModelKind::kCp) throw ConfigError("predict_cp on a non-CP model");
  const auto rows = select_rows(model, index);
  return cp_value(rows, model.rank());
}

double predict_costco(const FactorModel& model, std::span<const Index> index) {
  if (model.kind() != ModelKind::kCostco) {
    throw ConfigError("predict_costco on a non-CoSTCo model");
  }
  const auto rows = select_rows(model, index);
  CostcoTrace trace;
  return costco_forward(model, rows, trace);
}

double predict(const FactorModel& model, std::span<const Index> index) {
  return model.kind() == ModelKind::kCp ? predict_cp(model, index)
                                        : predict_costco(model, index);
}

double predict_generic(const FactorModel& model, RowSet rows) {
  check_rows(model, rows);
  if (model.kind() == ModelKind::kCp) return cp_value(rows, model.rank());
  CostcoTrace trace;
  return costco_forward(model, rows, trace);
}

double value_and_gradient(const FactorModel& model, RowSet rows, std::span<double> row_grad,
                          std::span<double> theta_grad) {
  check_rows(model, rows);
  const std::size_t n_modes = model.order(), rank = model.rank();
  if (row_grad.size() != n_modes * rank || theta_grad.size() != model.theta_size()) {
    throw ArgumentError("gradient buffers have the wrong size");
  }
  if (model.kind() == ModelKind::kCp) {
    double sum = 0.0;
    for (std::size_t r = 0; r < rank; ++r) {
      double prod = 1.0;
      for (std::size_t n = 0; n < n_modes; ++n) prod *= rows[n][r];
      sum += prod;
      for (std::size_t n = 0; n < n_modes; ++n) {
        double others = 1.0;
        for (std::size_t m = 0; m < n_modes; ++m) {
          if (m != n) others *= rows[m][r];
        }
        row_grad[n * rank + r] = others;
      }
    }
    return sum;
  }
  CostcoTrace trace;
  const double y = costco_forward(model, rows, trace);
  costco_backward(model, rows, trace, row_grad, theta_grad);
  return y;
}

EntryGradient gradients(const FactorModel& model, std::span<const Index> index,
                        double residual) {
  const auto rows = select_rows(model, index);
  const std::size_t rank = model.rank();
  std::vector<double> row_grad(model.order() * rank);
  EntryGradient out;
  out.theta.resize(model.theta_size());
  value_and_gradient(model, rows, row_grad, out.theta);
  const double scale = 2.0 * residual;
  for (std::size_t n = 0; n < model.order(); ++n) {
    std::vector<double> g(row_grad.begin() + n * rank, row_grad.begin() + (n + 1) * rank);
    for (double& v : g) v *= scale;
    out.rows.push_back(std::move(g));
  }
  for (double& v : out.theta) v *= scale;
  return out;
}

GradientScatter::GradientScatter(const FactorModel& model)
    : row_grad_(model.order() * model.rank()), theta_grad_(model.theta_size()) {}

double GradientScatter::compute(const FactorModel& model, std::span<const Index> index) {
  const auto rows = select_rows(model, index);
  return value_and_gradient(model, rows, row_grad_, theta_grad_);
}

void GradientScatter::scatter(const FactorModel& model, std::span<const Index> index,
                              double scale, std::span<double> grad) const {
  const std::size_t rank = model.rank();
  for (std::size_t n = 0; n < model.order(); ++n) {
    double* dst = grad.data() + model.row_offset(n, index[n]);
    for (std::size_t r = 0; r < rank; ++r) dst[r] += scale * row_grad_[n * rank + r];
  }
  double* theta_dst = grad.data() + model.theta_offset();
  for (std::size_t k = 0; k < theta_grad_.size(); ++k) theta_dst[k] += scale * theta_grad_[k];
}

FactorModel init_model(ModelKind kind, std::vector<std::size_t> dims, std::size_t rank,
                       double scale, std::uint64_t seed, CostcoConfig costco) {
  if (!(scale > 0.0)) throw ArgumentError("initialization scale must be positive");
  FactorModel model(kind, std::move(dims), rank, costco);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> factor_dist(-scale, scale);
  auto params = model.params();
  for (std::size_t k = 0; k < model.theta_offset(); ++k) params[k] = factor_dist(rng);

  if (kind == ModelKind::kCostco) {
    const CostcoLayout& l = model.layout();
    const std::size_t nc = model.costco().channels, nh = model.costco().hidden;
    auto theta = model.theta();
    // Each layer (weights and bias) uses bound 1/sqrt(fan_in).
    auto fill = [&](std::size_t begin, std::size_t end, std::size_t fan_in) {
      std::uniform_real_distribution<double> d(-1.0 / std::sqrt(static_cast<double>(fan_in)),
                                               1.0 / std::sqrt(static_cast<double>(fan_in)));
      for (std::size_t k = begin; k < end; ++k) theta[k] = d(rng);
    };
    fill(l.conv1_w, l.conv2_w, model.order());
    fill(l.conv2_w, l.mlp_w, nc * rank);
    fill(l.mlp_w, l.out_w, nc);
    fill(l.out_w, l.size, nh);
  }
  return model;
}

void write_model(const FactorModel& model, std::ostream& out) {
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "kind " << to_string(model.kind()) << '\n';
  out << "rank " << model.rank() << '\n';
  out << "dims";
  for (std::size_t d : model.dims()) out << ' ' << d;
  out << '\n';
  if (model.kind() == ModelKind::kCostco) {
    out << "costco " << model.costco().channels << ' ' << model.costco().hidden << ' '
        << to_string(model.costco().activation) << '\n';
  }
  out << "params " << model.num_params() << '\n';
  char buf[64];
  for (double v : model.params()) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf << '\n';
  }
}

FactorModel read_model(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kCheckpointMagic) {
    throw ParseError("not a model checkpoint", 0);
  }
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version), 0);
  }
  auto expect = [&](const char* key) {
    std::string k;
    if (!(in >> k) || k != key) throw ParseError(std::string("checkpoint: expected '") + key + "'", 0);
  };
  std::string kind_name;
  expect("kind");
  in >> kind_name;
  const ModelKind kind = parse_model_kind(kind_name);
  std::size_t rank = 0;
  expect("rank");
  in >> rank;
  expect("dims");
  std::string line;
  std::getline(in, line);
  std::istringstream dims_in(line);
  std::vector<std::size_t> dims;
  for (std::size_t d; dims_in >> d;) dims.push_back(d);

  CostcoConfig cfg;
  if (kind == ModelKind::kCostco) {
    std::string act;
    expect("costco");
    in >> cfg.channels >> cfg.hidden >> act;
    cfg.activation = parse_activation(act);
  }
  std::size_t count = 0;
  expect("params");
  in >> count;
  FactorModel model(kind, dims, rank, cfg);
  if (count != model.num_params()) throw ParseError("checkpoint: parameter count mismatch", 0);
  auto params = model.params();
  std::string tok;
  for (std::size_t k = 0; k < count; ++k) {
    if (!(in >> tok)) throw ParseError("checkpoint: truncated parameter block", 0);
    params[k] = std::strtod(tok.c_str(), nullptr);
  }
  if (!model.all_finite()) throw ParseError("checkpoint: non-finite parameter", 0);
  return model;
}

void save_model(const FactorModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  write_model(model, out);
}

FactorModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_model(in);
}

}  // namespace fairtc
