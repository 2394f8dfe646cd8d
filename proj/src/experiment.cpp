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
#include "fairtc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "fairtc/error.hpp"
#include "json.hpp"

namespace fairtc {
namespace {

// Stream for rows appended to the sensitive factor of the final model.
constexpr std::uint64_t kExtraRowSeedSalt = 0x9e3779b97f4a7c15ULL;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string short_fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string run_name(const RunSetting& s) {
  return to_string(s.method) + "_kr" + short_fmt(s.keep_rate) + "_lf" +
         short_fmt(s.fairness_coeff) + "_g" + short_fmt(s.gamma) + "_k" + std::to_string(s.k) +
         "_s" + std::to_string(s.seed);
}

void write_log_file(const std::filesystem::path& path, const TrainReport& report) {
  std::ofstream out(path);
  write_training_log(report, out);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

struct Moments {
  double mean = 0.0, std = 0.0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

}  // namespace

Dataset load_dataset(const DataConfig& data) {
  if (data.synthetic) {
    SynthData synth = generate(data.synth);
    return {std::move(synth.tensor), std::move(synth.context)};
  }
  SparseTensor tensor = load_tensor(data.tensor_path, data.dims);
  if (data.sensitive_mode >= tensor.order()) {
    throw ConfigError("data.sensitive_mode exceeds the tensor order");
  }
  SensitiveContext ctx =
      load_sensitive(data.sensitive_path, tensor.dim(data.sensitive_mode), data.sensitive_mode);
  return {std::move(tensor), std::move(ctx)};
}

StaffResult fit_staff(const SparseTensor& train_data, const SparseTensor& validation,
                      const SensitiveContext& ctx, const TrainConfig& cfg,
                      const AugmentConfig& aug, ModelKind kind, const CostcoConfig& costco,
                      double init_scale) {
  const std::size_t s = ctx.sensitive_mode();
  const FactorModel init =
      init_model(kind, train_data.dims(), cfg.rank, init_scale, cfg.seed, costco);

  TrainConfig pre_cfg = cfg;
  pre_cfg.objective = Objective::kPlain;
  pre_cfg.fairness_coeff = 0.0;

  StaffResult out;
  out.pretrain = train(init, train_data, validation, ctx, pre_cfg);
  const FactorModel& pre = out.pretrain.model;
  out.graph = build_graph(pre.factor(s), pre.rank(), ctx, aug.k, aug.gamma);
  out.augmented = generate_entries(train_data, out.graph, pre, ctx,
                                   {aug.p, aug.q, cfg.seed, aug.targets});
  out.assembled = assemble(train_data, out.augmented);

  const FactorModel enlarged =
      init.with_extra_rows(s, out.augmented.entities.size(), init_scale, cfg.seed ^ kExtraRowSeedSalt);
  TrainConfig final_cfg = cfg;
  final_cfg.objective = Objective::kStaff;
  out.final = train(enlarged, out.assembled.tensor, validation,
                    augmented_context(ctx, out.augmented), final_cfg, out.assembled.pairs);
  return out;
}

RunOutcome run_setting(const ExperimentConfig& cfg, const Dataset& data,
                       const RunSetting& setting) {
  const DataSplit parts = split(data.tensor, cfg.data.split, setting.seed);
  const SparseTensor train_data =
      setting.keep_rate < 1.0
          ? downsample_minority(parts.train, data.context, setting.keep_rate, setting.seed)
          : parts.train;

  TrainConfig tc = cfg.train;
  tc.seed = setting.seed;
  tc.fairness_coeff = setting.fairness_coeff;

  RunOutcome out;
  out.setting = setting;
  auto fresh = [&] {
    return init_model(cfg.model, train_data.dims(), tc.rank, cfg.init_scale, tc.seed, cfg.costco);
  };

  switch (setting.method) {
    case Method::kPlain:
    case Method::kMadrPenalty:
    case Method::kMadePenalty: {
      tc.objective = setting.method == Method::kPlain         ? Objective::kPlain
                     : setting.method == Method::kMadrPenalty ? Objective::kMadrPenalty
                                                              : Objective::kMadePenalty;
      out.report = train(fresh(), train_data, parts.validation, data.context, tc);
      break;
    }
    case Method::kRandom: {
      tc.objective = Objective::kPlain;
      TrainConfig pre_cfg = tc;
      pre_cfg.fairness_coeff = 0.0;
      out.pretrain = train(fresh(), train_data, parts.validation, data.context, pre_cfg);
      const std::size_t budget = train_data.dim(data.context.sensitive_mode()) *
                                 (cfg.augmentation.p + cfg.augmentation.q);
      const SparseTensor augmented =
          random_augment(train_data, out.pretrain->model, budget, tc.seed);
      out.report = train(fresh(), augmented, parts.validation, data.context, tc);
      break;
    }
    case Method::kStaff: {
      AugmentConfig aug = cfg.augmentation;
      aug.gamma = setting.gamma;
      aug.k = setting.k;
      StaffResult staff = fit_staff(train_data, parts.validation, data.context, tc, aug, cfg.model,
                                    cfg.costco, cfg.init_scale);
      out.pretrain = std::move(staff.pretrain);
      out.report = std::move(staff.final);
      break;
    }
  }
  out.test = evaluate(out.report.model, parts.test, data.context);
  return out;
}

std::vector<RunSetting> expand_grid(const ExperimentConfig& cfg) {
  const auto& sw = cfg.sweep;
  const std::vector<double> keep =
      sw.keep_rate.empty() ? std::vector<double>{cfg.data.keep_rate} : sw.keep_rate;
  const std::vector<double> coeffs =
      sw.fairness_coeff.empty() ? std::vector<double>{cfg.train.fairness_coeff} : sw.fairness_coeff;
  const std::vector<double> gammas =
      sw.gamma.empty() ? std::vector<double>{cfg.augmentation.gamma} : sw.gamma;
  const std::vector<std::size_t> ks =
      sw.k.empty() ? std::vector<std::size_t>{cfg.augmentation.k} : sw.k;

  std::vector<RunSetting> grid;
  for (Method m : cfg.methods)
    for (double kr : keep)
      for (double lf : coeffs)
        for (double g : gammas)
          for (std::size_t k : ks)
            for (std::uint64_t seed : cfg.seeds) grid.push_back({m, kr, lf, g, k, seed});
  return grid;
}

ExperimentStatus run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  const Dataset data = load_dataset(cfg.data);
  const auto grid = expand_grid(cfg);
  std::filesystem::create_directories(cfg.output_dir);
  if (cfg.write_logs) std::filesystem::create_directories(cfg.output_dir / "logs");
  {
    std::ofstream out(cfg.output_dir / "config.yaml");
    out << config_to_yaml(cfg);
  }

  std::ofstream csv(cfg.output_dir / "results.csv");
  if (!csv) throw std::runtime_error("cannot write " + (cfg.output_dir / "results.csv").string());
  csv << "model,objective,keep_rate,lambda_f,gamma,k,seed,mse,made,madr";
  for (const auto& name : data.context.group_names()) csv << ",mae_" << name;
  csv << '\n';
  csv.flush();

  std::vector<std::optional<RunOutcome>> done(grid.size());
  std::vector<char> finished(grid.size(), 0);
  std::size_t next_to_write = 0;
  ExperimentStatus status;
  std::mutex mu;
  std::atomic<std::size_t> next_job{0};

  // Rows are written in grid order so the file does not depend on scheduling.
  auto flush_ready = [&] {
    while (next_to_write < grid.size() && finished[next_to_write]) {
      if (const auto& r = done[next_to_write]) {
        csv << to_string(cfg.model) << ',' << to_string(r->setting.method) << ','
            << fmt(r->setting.keep_rate) << ',' << fmt(r->setting.fairness_coeff) << ','
            << fmt(r->setting.gamma) << ',' << r->setting.k << ',' << r->setting.seed << ','
            << fmt(r->test.mse) << ',' << fmt(r->test.made) << ',' << fmt(r->test.madr);
        for (const auto& g : r->test.per_group) csv << ',' << fmt(g.mae);
        csv << '\n';
        ++status.rows_written;
      }
      ++next_to_write;
    }
    csv.flush();
  };

  auto worker = [&] {
    for (std::size_t j; (j = next_job.fetch_add(1)) < grid.size();) {
      const RunSetting& s = grid[j];
      std::optional<RunOutcome> result;
      std::string error;
      try {
        result = run_setting(cfg, data, s);
        if (cfg.write_logs) {
          const auto base = cfg.output_dir / "logs" / run_name(s);
          write_log_file(base.string() + ".csv", result->report);
          if (result->pretrain) write_log_file(base.string() + "_pretrain.csv", *result->pretrain);
        }
      } catch (const std::exception& e) {
        error = e.what();
      }
      std::lock_guard<std::mutex> lock(mu);
      if (result) {
        log << "[" << (j + 1) << "/" << grid.size() << "] " << run_name(s)
            << "  mse=" << short_fmt(result->test.mse) << "  made=" << short_fmt(result->test.made)
            << '\n';
      } else {
        status.failures.push_back(run_name(s) + ": " + error);
        log << "[" << (j + 1) << "/" << grid.size() << "] " << run_name(s) << " FAILED: " << error
            << '\n';
      }
      done[j] = std::move(result);
      finished[j] = 1;
      flush_ready();
    }
  };

  const std::size_t n_workers = std::min(cfg.workers, std::max<std::size_t>(1, grid.size()));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Aggregate over seeds, keyed by every non-seed grid coordinate.
  nlohmann::ordered_json summary = nlohmann::ordered_json::array();
  std::map<std::tuple<int, double, double, double, std::size_t>, std::vector<const RunOutcome*>>
      groups;
  std::vector<std::tuple<int, double, double, double, std::size_t>> key_order;
  for (const auto& r : done) {
    if (!r) continue;
    const auto& s = r->setting;
    auto key = std::make_tuple(static_cast<int>(s.method), s.keep_rate, s.fairness_coeff, s.gamma, s.k);
    auto& bucket = groups[key];
    if (bucket.empty()) key_order.push_back(key);
    bucket.push_back(&*r);
  }
  for (const auto& key : key_order) {
    const auto& runs = groups[key];
    std::vector<double> mse, made, madr;
    for (const auto* r : runs) {
      mse.push_back(r->test.mse);
      made.push_back(r->test.made);
      madr.push_back(r->test.madr);
    }
    const auto& s = runs.front()->setting;
    auto stat = [](const std::vector<double>& v) {
      const Moments m = moments(v);
      return nlohmann::ordered_json{{"mean", m.mean}, {"std", m.std}};
    };
    summary.push_back({{"model", to_string(cfg.model)},
                       {"objective", to_string(s.method)},
                       {"keep_rate", s.keep_rate},
                       {"lambda_f", s.fairness_coeff},
                       {"gamma", s.gamma},
                       {"k", s.k},
                       {"seeds", runs.size()},
                       {"mse", stat(mse)},
                       {"made", stat(made)},
                       {"madr", stat(madr)}});
  }
  std::ofstream(cfg.output_dir / "summary.json") << summary.dump(2) << '\n';
  return status;
}

std::vector<ResultRow> read_results(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot open " + csv_path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty results file " + csv_path.string());
  const auto header = split_csv(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t k = 0; k < header.size(); ++k) col[header[k]] = k;
  for (const char* name : {"model", "objective", "keep_rate", "lambda_f", "gamma", "k", "seed",
                           "mse", "made", "madr"}) {
    if (!col.count(name)) {
      throw ParseError(csv_path.string() + ": missing column '" + name + "'", 1);
    }
  }
  std::vector<ResultRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw ParseError(csv_path.string() + ": wrong cell count on line " + std::to_string(lineno),
                       lineno);
    }
    try {
      ResultRow r;
      r.model = cells[col["model"]];
      r.objective = cells[col["objective"]];
      r.keep_rate = std::stod(cells[col["keep_rate"]]);
      r.fairness_coeff = std::stod(cells[col["lambda_f"]]);
      r.gamma = std::stod(cells[col["gamma"]]);
      r.k = std::stoul(cells[col["k"]]);
      r.seed = std::stoull(cells[col["seed"]]);
      r.mse = std::stod(cells[col["mse"]]);
      r.made = std::stod(cells[col["made"]]);
      r.madr = std::stod(cells[col["madr"]]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw ParseError(csv_path.string() + ": bad number on line " + std::to_string(lineno),
                       lineno);
    }
  }
  return rows;
}

std::vector<TradeoffRow> compute_tradeoff(const std::vector<ResultRow>& rows) {
  if (rows.empty()) throw ArgumentError("no results to report");

  // Seed means per full setting.
  using SettingKey = std::tuple<std::string, double, std::string, double, double, std::size_t>;
  std::map<SettingKey, std::vector<const ResultRow*>> settings;
  std::vector<SettingKey> setting_order;
  for (const auto& r : rows) {
    SettingKey key{r.model, r.keep_rate, r.objective, r.fairness_coeff, r.gamma, r.k};
    auto& v = settings[key];
    if (v.empty()) setting_order.push_back(key);
    v.push_back(&r);
  }

  using PanelKey = std::tuple<std::string, double, std::string>;
  std::map<PanelKey, TradeoffRow> best;
  std::vector<PanelKey> panel_order;
  for (const auto& key : setting_order) {
    const auto& runs = settings[key];
    TradeoffRow t;
    std::tie(t.model, t.keep_rate, t.objective, t.fairness_coeff, t.gamma, t.k) = key;
    t.seeds = runs.size();
    for (const auto* r : runs) {
      t.mse += r->mse;
      t.made += r->made;
    }
    t.mse /= static_cast<double>(runs.size());
    t.made /= static_cast<double>(runs.size());
    PanelKey pk{t.model, t.keep_rate, t.objective};
    auto it = best.find(pk);
    if (it == best.end()) {
      panel_order.push_back(pk);
      best.emplace(pk, t);
    } else if (t.mse + t.made < it->second.mse + it->second.made) {
      it->second = t;
    }
  }

  std::vector<TradeoffRow> out;
  for (const auto& pk : panel_order) out.push_back(best[pk]);
  for (auto& a : out) {
    for (const auto& b : out) {
      if (&a == &b || a.model != b.model || a.keep_rate != b.keep_rate) continue;
      const bool no_worse = b.mse <= a.mse && b.made <= a.made;
      const bool better = b.mse < a.mse || b.made < a.made;
      if (no_worse && better) a.pareto = false;
    }
  }
  return out;
}

std::vector<TradeoffRow> report(const std::filesystem::path& dir, std::ostream& out) {
  const auto rows = compute_tradeoff(read_results(dir / "results.csv"));
  std::ofstream csv(dir / "tradeoff.csv");
  csv << "model,keep_rate,objective,lambda_f,gamma,k,seeds,mse,made,mse_x100,made_x100,pareto\n";
  for (const auto& r : rows) {
    csv << r.model << ',' << fmt(r.keep_rate) << ',' << r.objective << ',' << fmt(r.fairness_coeff)
        << ',' << fmt(r.gamma) << ',' << r.k << ',' << r.seeds << ',' << fmt(r.mse) << ','
        << fmt(r.made) << ',' << fmt(r.mse * 100.0) << ',' << fmt(r.made * 100.0) << ','
        << (r.pareto ? "optimal" : "dominated") << '\n';
  }

  out << std::left << std::setw(8) << "model" << std::setw(10) << "keep" << std::setw(14)
      << "objective" << std::setw(12) << "MSE x100" << std::setw(12) << "MADE x100"
      << "pareto\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(8) << r.model << std::setw(10) << short_fmt(r.keep_rate)
        << std::setw(14) << r.objective << std::setw(12) << std::fixed << std::setprecision(4)
        << r.mse * 100.0 << std::setw(12) << r.made * 100.0 << std::defaultfloat
        << (r.pareto ? "optimal" : "dominated") << '\n';
  }
  return rows;
}

}  // namespace fairtc
