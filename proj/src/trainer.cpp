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
#include "fairtc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "fairtc/error.hpp"
#include "fairtc/metrics.hpp"

namespace fairtc {
namespace {

inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Gap between the largest and smallest group mean of `amount`, with its
// derivative through `d_amount` (d amount / d prediction).
PenaltyTerms gap_terms(std::span<const double> amount, std::span<const double> d_amount,
                       std::span<const int> groups, int num_groups) {
  PenaltyTerms out;
  out.d_prediction.assign(amount.size(), 0.0);
  std::vector<double> sum(num_groups, 0.0);
  std::vector<std::size_t> count(num_groups, 0);
  for (std::size_t k = 0; k < amount.size(); ++k) {
    sum[groups[k]] += amount[k];
    ++count[groups[k]];
  }
  int hi = -1, lo = -1;
  double hi_mean = 0.0, lo_mean = 0.0;
  for (int g = 0; g < num_groups; ++g) {
    if (count[g] == 0) continue;
    const double mean = sum[g] / static_cast<double>(count[g]);
    if (hi < 0 || mean > hi_mean) hi = g, hi_mean = mean;
    if (lo < 0 || mean < lo_mean) lo = g, lo_mean = mean;
  }
  if (hi < 0 || hi == lo) return out;
  out.value = hi_mean - lo_mean;
  if (out.value == 0.0) return out;
  const double w_hi = 1.0 / static_cast<double>(count[hi]);
  const double w_lo = 1.0 / static_cast<double>(count[lo]);
  for (std::size_t k = 0; k < amount.size(); ++k) {
    if (groups[k] == hi) out.d_prediction[k] += w_hi * d_amount[k];
    if (groups[k] == lo) out.d_prediction[k] -= w_lo * d_amount[k];
  }
  return out;
}

struct BatchPredictions {
  std::vector<double> predictions, targets;
  std::vector<int> groups;
};

BatchPredictions predict_batch(const FactorModel& model, const SparseTensor& data,
                               std::span<const std::size_t> batch, const SensitiveContext& ctx) {
  BatchPredictions b;
  b.predictions.reserve(batch.size());
  for (std::size_t e : batch) {
    b.predictions.push_back(predict(model, data.index(e)));
    b.targets.push_back(data.value(e));
    b.groups.push_back(ctx.group_of_entry(data, e));
  }
  return b;
}

double apply_penalty(const FactorModel& model, const SparseTensor& data,
                     std::span<const std::size_t> batch, const PenaltyTerms& terms,
                     std::span<double> grad, double weight) {
  if (!grad.empty() && terms.value != 0.0) {
    GradientScatter scatter(model);
    for (std::size_t k = 0; k < batch.size(); ++k) {
      if (terms.d_prediction[k] == 0.0) continue;
      scatter.add(model, data.index(batch[k]), weight * terms.d_prediction[k], grad);
    }
  }
  return weight * terms.value;
}

double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace

std::string to_string(Objective objective) {
  switch (objective) {
    case Objective::kPlain: return "plain";
    case Objective::kMadrPenalty: return "madr_penalty";
    case Objective::kMadePenalty: return "made_penalty";
    case Objective::kStaff: return "staff";
  }
  return "unknown";
}

Objective parse_objective(const std::string& name) {
  if (name == "plain") return Objective::kPlain;
  if (name == "madr_penalty" || name == "madr") return Objective::kMadrPenalty;
  if (name == "made_penalty" || name == "made") return Objective::kMadePenalty;
  if (name == "staff") return Objective::kStaff;
  throw ConfigError("unknown objective '" + name + "'");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ArgumentError("batch_size must be at least 1");
  if (!(learning_rate > 0.0)) throw ArgumentError("learning_rate must be positive");
  if (!(weight_decay >= 0.0)) throw ArgumentError("weight_decay must be non-negative");
  if (!(fairness_coeff >= 0.0)) throw ArgumentError("fairness_coeff must be non-negative");
  if (max_epochs < 1) throw ArgumentError("max_epochs must be at least 1");
}

Adam::Adam(std::size_t num_params, double learning_rate, double beta1, double beta2,
           double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon),
      m_(num_params, 0.0), v_(num_params, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * grad[k];
    v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * grad[k] * grad[k];
    params[k] -= lr_ * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + eps_);
  }
}

double loss_plain(const FactorModel& model, const SparseTensor& data,
                  std::span<const std::size_t> batch, double weight_decay,
                  std::size_t total_entries) {
  double loss = 0.0;
  for (std::size_t e : batch) {
    const double r = predict(model, data.index(e)) - data.value(e);
    loss += r * r;
  }
  if (weight_decay > 0.0 && total_entries > 0) {
    const double frac = static_cast<double>(batch.size()) / static_cast<double>(total_entries);
    loss += weight_decay * frac * squared_norm(model.params());
  }
  return loss;
}

PenaltyTerms madr_terms(std::span<const double> predictions, std::span<const int> groups,
                        int num_groups) {
  std::vector<double> amount(predictions.size()), d(predictions.size());
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    amount[k] = std::abs(predictions[k]);
    d[k] = sign(predictions[k]);
  }
  return gap_terms(amount, d, groups, num_groups);
}

PenaltyTerms made_terms(std::span<const double> predictions, std::span<const double> targets,
                        std::span<const int> groups, int num_groups) {
  std::vector<double> amount(predictions.size()), d(predictions.size());
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const double err = predictions[k] - targets[k];
    amount[k] = std::abs(err);
    d[k] = sign(err);
  }
  return gap_terms(amount, d, groups, num_groups);
}

double penalty_madr(const FactorModel& model, const SparseTensor& data,
                    std::span<const std::size_t> batch, const SensitiveContext& ctx,
                    std::span<double> grad, double weight) {
  const auto b = predict_batch(model, data, batch, ctx);
  return apply_penalty(model, data, batch, madr_terms(b.predictions, b.groups, ctx.num_groups()),
                       grad, weight);
}

double penalty_made(const FactorModel& model, const SparseTensor& data,
                    std::span<const std::size_t> batch, const SensitiveContext& ctx,
                    std::span<double> grad, double weight) {
  const auto b = predict_batch(model, data, batch, ctx);
  return apply_penalty(model, data, batch,
                       made_terms(b.predictions, b.targets, b.groups, ctx.num_groups()), grad,
                       weight);
}

double penalty_coupling(const FactorModel& model, std::size_t sensitive_mode,
                        std::span<const CouplingPair> pairs, double weight,
                        std::span<double> grad) {
  if (sensitive_mode >= model.order()) throw ArgumentError("sensitive mode out of range");
  const std::size_t rows = model.dims()[sensitive_mode];
  const std::size_t rank = model.rank();
  double total = 0.0;
  for (const auto& p : pairs) {
    if (p.original >= rows || p.augmented >= rows) {
      throw BoundsError("coupling pair (" + std::to_string(p.original) + ", " +
                        std::to_string(p.augmented) + ") outside sensitive factor with " +
                        std::to_string(rows) + " rows");
    }
    const auto uo = model.row(sensitive_mode, p.original);
    const auto ua = model.row(sensitive_mode, p.augmented);
    for (std::size_t r = 0; r < rank; ++r) {
      const double diff = uo[r] - ua[r];
      total += diff * diff;
      if (!grad.empty()) {
        grad[model.row_offset(sensitive_mode, p.original) + r] += 2.0 * weight * diff;
        grad[model.row_offset(sensitive_mode, p.augmented) + r] -= 2.0 * weight * diff;
      }
    }
  }
  return weight * total;
}

TrainReport train(const FactorModel& initial, const SparseTensor& train_data,
                  const SparseTensor& validation, const SensitiveContext& ctx,
                  const TrainConfig& cfg,
                  const std::optional<std::vector<CouplingPair>>& coupling) {
  cfg.validate();
  if (train_data.empty()) throw ArgumentError("training tensor is empty");
  if (validation.empty()) throw ArgumentError("validation tensor is empty");
  if (train_data.dims() != initial.dims()) {
    throw ArgumentError("model dims do not match training tensor dims");
  }
  if (validation.order() != initial.order()) {
    throw ArgumentError("validation tensor order does not match model");
  }
  for (std::size_t n = 0; n < initial.order(); ++n) {
    if (validation.dim(n) > initial.dims()[n]) {
      throw ArgumentError("validation tensor exceeds model dims in mode " + std::to_string(n));
    }
  }
  if (cfg.rank != 0 && cfg.rank != initial.rank()) {
    throw ArgumentError("model rank does not match TrainConfig rank");
  }
  const std::size_t s = ctx.sensitive_mode();
  if (s >= initial.order() || ctx.num_entities() != initial.dims()[s]) {
    throw ArgumentError("sensitive context does not cover the model's sensitive mode");
  }
  const bool staff = cfg.objective == Objective::kStaff;
  if (staff && !coupling) throw ArgumentError("staff objective requires coupling pairs");
  if (!staff && coupling) throw ArgumentError("coupling pairs given for a non-staff objective");

  FactorModel model = initial;
  const std::size_t total = train_data.nnz();
  std::vector<double> grad(model.num_params());
  Adam adam(model.num_params(), cfg.learning_rate);
  GradientScatter scatter(model);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);

  const bool use_madr = cfg.objective == Objective::kMadrPenalty && cfg.fairness_coeff > 0.0;
  const bool use_made = cfg.objective == Objective::kMadePenalty && cfg.fairness_coeff > 0.0;
  const bool use_coupling = staff && cfg.fairness_coeff > 0.0;

  TrainReport report;
  std::vector<double> best_params(model.params().begin(), model.params().end());
  double best_mse = std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::vector<double> extra;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < total; start += cfg.batch_size, ++batch_no) {
      const std::span<const std::size_t> batch(order.data() + start,
                                               std::min(cfg.batch_size, total - start));
      const double frac = static_cast<double>(batch.size()) / static_cast<double>(total);
      std::fill(grad.begin(), grad.end(), 0.0);
      double loss = 0.0;

      // Fairness penalties act through the predictions, so fold their
      // per-entry derivative into the squared-error scale.
      extra.assign(batch.size(), 0.0);
      if (use_madr || use_made) {
        const auto b = predict_batch(model, train_data, batch, ctx);
        const PenaltyTerms terms =
            use_madr ? madr_terms(b.predictions, b.groups, ctx.num_groups())
                     : made_terms(b.predictions, b.targets, b.groups, ctx.num_groups());
        loss += cfg.fairness_coeff * terms.value;
        for (std::size_t k = 0; k < batch.size(); ++k) {
          extra[k] = cfg.fairness_coeff * terms.d_prediction[k];
        }
      }

      for (std::size_t k = 0; k < batch.size(); ++k) {
        const auto idx = train_data.index(batch[k]);
        const double r = scatter.compute(model, idx) - train_data.value(batch[k]);
        loss += r * r;
        scatter.scatter(model, idx, 2.0 * r + extra[k], grad);
      }

      if (cfg.weight_decay > 0.0) {
        const double w = cfg.weight_decay * frac;
        const auto p = model.params();
        loss += w * squared_norm(p);
        for (std::size_t k = 0; k < p.size(); ++k) grad[k] += 2.0 * w * p[k];
      }
      if (use_coupling) {
        loss += penalty_coupling(model, s, *coupling, cfg.fairness_coeff * frac, grad);
      }

      if (!std::isfinite(loss)) {
        throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch) +
                                ", batch " + std::to_string(batch_no),
                            epoch, batch_no);
      }
      epoch_loss += loss;
      adam.step(model.params(), grad);
    }
    if (!model.all_finite()) {
      throw TrainingError("non-finite parameters after epoch " + std::to_string(epoch), epoch,
                          batch_no);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss;
    stats.val_mse = mean_squared_error(model, validation);
    stats.val_made = std::numeric_limits<double>::quiet_NaN();
    const auto counts = group_counts(validation, ctx);
    if (std::all_of(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; })) {
      stats.val_made = evaluate(model, validation, ctx).made;
    }
    report.history.push_back(stats);

    if (stats.val_mse < best_mse) {
      best_mse = stats.val_mse;
      report.best_epoch = epoch;
      std::copy(model.params().begin(), model.params().end(), best_params.begin());
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }

  std::copy(best_params.begin(), best_params.end(), model.params().begin());
  report.model = std::move(model);
  return report;
}

void write_training_log(const TrainReport& report, std::ostream& out) {
  out << "epoch,train_loss,val_mse,val_made\n";
  char buf[128];
  for (const auto& e : report.history) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_mse,
                  e.val_made);
    out << buf;
  }
}

}  // namespace fairtc
