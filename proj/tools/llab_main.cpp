// llab: masked-training laboratory CLI.
//
// Verbs:
//   run       execute a run grid from a config file
//   spectrum  Hessian spectral densities for (k, R) cells
//   pareto    recompute the Pareto CSV from a result directory
//   plots     emit plot-data CSVs from a result directory
//
// Exit codes: 0 success, 1 config error, 2 run failures, 3 I/O error.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "llab/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"llab - lottery-ticket masked-training laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::string result_dir;
  int workers = 0;
  std::vector<int> k_list;
  std::vector<double> r_list;

  auto* run = app.add_subcommand("run", "execute a run grid");
  run->add_option("config", config_path, "experiment config file")->required();
  run->add_option("--out", out_override, "output directory override");
  run->add_option("--workers", workers, "concurrent runs (default: config value)");

  auto* spectrum = app.add_subcommand("spectrum", "Hessian spectral densities");
  spectrum->add_option("config", config_path, "experiment config file")->required();
  spectrum->add_option("--out", out_override, "output directory override");
  spectrum->add_option("--k", k_list, "warm-up epochs to analyze (default: config)");
  spectrum->add_option("--r", r_list, "R percentages to analyze (default: config)");

  auto* pareto = app.add_subcommand("pareto", "recompute pareto.csv");
  pareto->add_option("dir", result_dir, "result directory")->required();

  auto* plots = app.add_subcommand("plots", "emit plot-data CSVs");
  plots->add_option("dir", result_dir, "result directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed() || spectrum->parsed()) {
      llab::ExperimentConfig config;
      try {
        config = llab::parse_config(config_path);
      } catch (const llab::Error& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
      }
      const auto out = llab::resolve_output_dir(out_override.empty() ? config.output_dir
                                                                     : out_override);
      if (run->parsed()) {
        const int n_workers = workers > 0 ? workers : config.workers;
        const int failures = llab::run_grid(config, out, n_workers);
        if (failures > 0) {
          std::fprintf(stderr, "%d run(s) failed; see *.failed.json in %s\n", failures,
                       out.string().c_str());
          return 2;
        }
        std::printf("grid complete: %s\n", out.string().c_str());
      } else {
        llab::run_spectrum(config, out, k_list, r_list);
        std::printf("spectra written: %s\n", out.string().c_str());
      }
      return 0;
    }
    if (pareto->parsed()) {
      llab::write_pareto(result_dir);
      return 0;
    }
    if (plots->parsed()) {
      llab::emit_plot_data(result_dir);
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
