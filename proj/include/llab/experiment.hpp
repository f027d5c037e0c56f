#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "llab/config.hpp"

namespace llab {

struct GridCell {
  std::string algorithm;
  double r_percent = 100.0;
  int k = 0;
  int iterations = 0;
  uint64_t seed = 0;
};

// Deterministic cell order: R, then k, then I, then seed (vanilla: seeds
// only). Cells run concurrently grouped by seed; outputs are written in
// grid order after all cells finish.
std::vector<GridCell> grid_cells(const ExperimentConfig& config);

// Executes the grid into out_dir: one result JSON + mask per run, an
// aggregate CSV, a Pareto CSV, and failure records. Returns the number
// of failed cells; failures never abort the rest of the grid.
int run_grid(const ExperimentConfig& config, const std::filesystem::path& out_dir, int workers);

// Fig.-2 analogue: spectra for every (seed, k, R) cell plus unmasked
// references; writes one JSON per cell and a flatness table CSV.
void run_spectrum(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                  const std::vector<int>& k_list, const std::vector<double>& r_list);

// Recomputes pareto.csv from the result JSONs in a directory.
void write_pareto(const std::filesystem::path& result_dir);

// Emits plot-data CSVs (accuracy-vs-flops scatter with a log-scale
// column, and per-cell spectral histograms) from a result directory.
void emit_plot_data(const std::filesystem::path& result_dir);

// Resolves an output directory against the LLAB_OUTPUT_ROOT env var.
std::filesystem::path resolve_output_dir(const std::string& dir);

}  // namespace llab
