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
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "fairtc/experiment.hpp"
#include "fairtc/synthetic.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"fairtc: group-fair sparse tensor completion experiments"};
  app.require_subcommand(0, 1);

  bool print_defaults = false;
  app.add_flag("--print-defaults", print_defaults, "Print the default config and exit");

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string out_dir;
  auto* run = app.add_subcommand("run", "Run an experiment grid from a config file");
  run->add_option("config", config_path, "Experiment config (YAML)")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Run a single seed instead of the configured list");
  run->add_option("--workers", workers, "Parallel worker count");
  run->add_option("--out", out_dir, "Results directory (overrides output_dir)");

  std::string results_dir;
  auto* rep = app.add_subcommand("report", "Summarize results.csv into a trade-off table");
  rep->add_option("dir", results_dir, "Results directory")->required()->check(CLI::ExistingDirectory);

  std::string spec_path, synth_out;
  auto* gen = app.add_subcommand("gen-synth", "Write a synthetic tensor and its labels");
  gen->add_option("spec", spec_path, "Synthetic spec (YAML)")->required()->check(CLI::ExistingFile);
  gen->add_option("out", synth_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (print_defaults) {
    std::cout << fairtc::defaults_text();
    return 0;
  }

  try {
    if (*run) {
      fairtc::ExperimentConfig cfg = fairtc::load_config(config_path);
      if (seed) cfg.seeds = {*seed};
      if (workers) cfg.workers = std::max<std::size_t>(1, *workers);
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      const auto status = fairtc::run_experiment(cfg, std::cerr);
      std::cerr << status.rows_written << " rows written to "
                << (cfg.output_dir / "results.csv").string() << '\n';
      if (!status.failures.empty()) {
        std::cerr << status.failures.size() << " run(s) failed\n";
        return 2;
      }
      return 0;
    }
    if (*rep) {
      fairtc::report(results_dir, std::cout);
      return 0;
    }
    if (*gen) {
      const auto spec = fairtc::load_synth_spec(spec_path);
      const auto data = fairtc::generate(spec);
      fs::create_directories(synth_out);
      fairtc::save_tensor(data.tensor, fs::path(synth_out) / "tensor.tsv");
      fairtc::save_sensitive(data.context, fs::path(synth_out) / "sensitive.tsv");
      fairtc::save_model(data.truth, fs::path(synth_out) / "truth.model");
      std::cerr << data.tensor.nnz() << " entries written to " << synth_out << '\n';
      return 0;
    }
    std::cout << app.help();
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
