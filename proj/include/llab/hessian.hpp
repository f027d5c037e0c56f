#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "llab/dataset.hpp"
#include "llab/graph.hpp"
#include "llab/mask.hpp"
#include "llab/train.hpp"

namespace llab {

// Symmetric linear operator accessed only through products.
using HvpFn = std::function<std::vector<double>(const std::vector<double>&)>;

// Hessian of the dataset-mean loss: sample-weighted mean of per-batch
// HVPs, batches in fixed order.
HvpFn dataset_hvp(const ModelSpec& model, const std::vector<double>& params, const Dataset& data,
                  int batch_size);

// Embedding of the active subspace into R^N and its left inverse.
std::vector<double> embed_active(const Mask& mask, const std::vector<double>& v_active);
std::vector<double> project_active(const Mask& mask, const std::vector<double>& v_full);

// Hessian restricted to the active coordinates: embed, full HVP at the
// masked point, project back.
std::vector<double> masked_hvp(const ModelSpec& model, const std::vector<double>& params,
                               const Mask& mask, const Batch& batch,
                               const std::vector<double>& v_active);
HvpFn masked_dataset_hvp(const ModelSpec& model, const std::vector<double>& params,
                         const Mask& mask, const Dataset& data, int batch_size);

// m-step Lanczos with full reorthogonalization from a unit Rademacher
// probe; stops early when the off-diagonal recurrence coefficient drops
// below 1e-10.
struct LanczosResult {
  std::vector<double> alpha;
  std::vector<double> beta;  // beta[j] couples steps j and j+1
  int steps = 0;
  bool breakdown = false;
  int breakdown_step = -1;
};
LanczosResult lanczos(const HvpFn& oracle, size_t dim, int m, uint64_t probe_seed);

// Ritz values and Gauss quadrature weights (squared first eigenvector
// components) of the Lanczos tridiagonal matrix. Weights sum to 1.
struct ProbeQuadrature {
  std::vector<double> values;
  std::vector<double> weights;
};
ProbeQuadrature ritz_quadrature(const LanczosResult& lanczos_result);

struct SlqSettings {
  int n_probes = 8;
  int lanczos_steps = 80;
  int bins = 201;
  uint64_t probe_seed = 1234;
};

struct SpectrumEstimate {
  std::vector<ProbeQuadrature> probes;
  int n_probes = 0;
  int lanczos_steps = 0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  std::vector<double> bin_edges;  // bins + 1 edges
  std::vector<double> mass;       // sums to 1
  uint64_t probe_seed = 0;
};

// Stochastic Lanczos quadrature: probe-averaged, Gaussian-broadened
// Ritz-weight measure with sigma = (lambda_max - lambda_min) / bins.
SpectrumEstimate slq_density(const HvpFn& oracle, size_t dim, const SlqSettings& settings);
SpectrumEstimate slq_density(const ModelSpec& model, const std::vector<double>& params,
                             const Mask& mask, const Dataset& data, int batch_size,
                             const SlqSettings& settings, bool restricted = true);

// Gaussian-broadened histogram of a fixed eigenvalue list on the same
// binning rule; the dense oracle behind the SLQ comparisons.
SpectrumEstimate density_from_eigenvalues(const std::vector<double>& eigenvalues, int bins);

// Dense Hessian eigenvalues via dim oracle products (tiny nets only).
std::vector<double> dense_eigenvalues(const HvpFn& oracle, size_t dim);
// L1 distance between two histograms on identical bin layouts built over
// possibly different supports: both are re-binned onto shared edges.
double histogram_l1(const SpectrumEstimate& a, const SpectrumEstimate& b);

struct FlatnessReport {
  double near_zero_mass = 0.0;
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  double eps_rel = 0.0;
  bool degenerate = false;  // all-zero spectrum
};
FlatnessReport flatness(const SpectrumEstimate& estimate, double eps_rel);

// Fig.-2-style table: per k, a 1-LOT (I=1) mask is drawn for every R and
// the density is estimated at W^k * M, plus one unmasked reference row.
struct SpectrumCell {
  int k = 0;
  double r_percent = 100.0;
  bool reference = false;
  SpectrumEstimate estimate;
  FlatnessReport report;
};
std::vector<SpectrumCell> spectrum_experiment(const ModelSpec& model,
                                              const std::vector<double>& w0,
                                              const std::vector<int>& k_list,
                                              const std::vector<double>& r_list,
                                              const TrainRecipe& recipe, const Dataset& train_set,
                                              const Dataset& test_set, const SlqSettings& settings,
                                              double eps_rel, const CheckpointStore* store = nullptr,
                                              bool restricted = true);

}  // namespace llab
