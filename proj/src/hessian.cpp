#include "llab/hessian.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace llab {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

// Gaussian-broadened mass on a fixed edge grid, normalized to 1.
std::vector<double> mass_on_edges(const std::vector<ProbeQuadrature>& probes, double sigma,
                                  const std::vector<double>& edges) {
  const size_t bins = edges.size() - 1;
  std::vector<double> mass(bins, 0.0);
  const double inv = 1.0 / (sigma * std::sqrt(2.0));
  const double probe_w = 1.0 / static_cast<double>(probes.size());
  for (const auto& p : probes) {
    for (size_t i = 0; i < p.values.size(); ++i) {
      const double lam = p.values[i];
      const double w = probe_w * p.weights[i];
      for (size_t b = 0; b < bins; ++b)
        mass[b] += w * 0.5 * (std::erf((edges[b + 1] - lam) * inv) - std::erf((edges[b] - lam) * inv));
    }
  }
  const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  if (total > 0.0)
    for (auto& m : mass) m /= total;
  return mass;
}

}  // namespace

HvpFn dataset_hvp(const ModelSpec& model, const std::vector<double>& params, const Dataset& data,
                  int batch_size) {
  if (data.size() == 0) throw Error("dataset_hvp: empty dataset");
  return [&model, params, &data, batch_size](const std::vector<double>& v) {
    std::vector<double> acc(params.size(), 0.0);
    for (size_t start = 0; start < data.size(); start += batch_size) {
      const size_t end = std::min(data.size(), start + static_cast<size_t>(batch_size));
      std::vector<size_t> idx(end - start);
      std::iota(idx.begin(), idx.end(), start);
      const auto hv = hvp(model, params, data.gather(idx), v);
      const double w = static_cast<double>(end - start) / static_cast<double>(data.size());
      for (size_t i = 0; i < acc.size(); ++i) acc[i] += w * hv[i];
    }
    return acc;
  };
}

std::vector<double> embed_active(const Mask& mask, const std::vector<double>& v_active) {
  if (v_active.size() != mask.active_count) throw Error("embed: active dimension mismatch");
  std::vector<double> full(mask.size(), 0.0);
  size_t j = 0;
  for (size_t i = 0; i < mask.size(); ++i)
    if (mask.bits[i]) full[i] = v_active[j++];
  return full;
}

std::vector<double> project_active(const Mask& mask, const std::vector<double>& v_full) {
  if (v_full.size() != mask.size()) throw Error("project: full dimension mismatch");
  std::vector<double> active;
  active.reserve(mask.active_count);
  for (size_t i = 0; i < mask.size(); ++i)
    if (mask.bits[i]) active.push_back(v_full[i]);
  return active;
}

std::vector<double> masked_hvp(const ModelSpec& model, const std::vector<double>& params,
                               const Mask& mask, const Batch& batch,
                               const std::vector<double>& v_active) {
  return project_active(mask, hvp(model, params, batch, embed_active(mask, v_active)));
}

HvpFn masked_dataset_hvp(const ModelSpec& model, const std::vector<double>& params,
                         const Mask& mask, const Dataset& data, int batch_size) {
  auto full = dataset_hvp(model, params, data, batch_size);
  return [full, mask](const std::vector<double>& v_active) {
    return project_active(mask, full(embed_active(mask, v_active)));
  };
}

LanczosResult lanczos(const HvpFn& oracle, size_t dim, int m, uint64_t probe_seed) {
  if (m < 1 || static_cast<size_t>(m) > dim) throw Error("lanczos: steps must be in [1, dim]");
  LanczosResult out;

  Rng rng(probe_seed);
  std::vector<double> v(dim);
  for (auto& x : v) x = rng.rademacher();
  const double nv = norm(v);
  for (auto& x : v) x /= nv;

  std::vector<std::vector<double>> basis{v};
  std::vector<double> v_prev(dim, 0.0);
  double beta_prev = 0.0;

  for (int j = 0; j < m; ++j) {
    std::vector<double> w = oracle(v);
    if (w.size() != dim) throw Error("lanczos: oracle dimension mismatch");
    const double alpha = dot(w, v);
    for (size_t i = 0; i < dim; ++i) w[i] -= alpha * v[i] + beta_prev * v_prev[i];
    // full reorthogonalization, two passes
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) {
        const double c = dot(w, b);
        for (size_t i = 0; i < dim; ++i) w[i] -= c * b[i];
      }
    out.alpha.push_back(alpha);
    out.steps = j + 1;
    if (j == m - 1) break;
    const double beta = norm(w);
    if (beta < 1e-10) {
      out.breakdown = true;
      out.breakdown_step = j + 1;
      break;
    }
    out.beta.push_back(beta);
    v_prev = v;
    for (size_t i = 0; i < dim; ++i) v[i] = w[i] / beta;
    basis.push_back(v);
    beta_prev = beta;
  }
  return out;
}

ProbeQuadrature ritz_quadrature(const LanczosResult& lanczos_result) {
  const int n = lanczos_result.steps;
  Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) tri(i, i) = lanczos_result.alpha[i];
  for (int i = 0; i + 1 < n; ++i) {
    tri(i, i + 1) = lanczos_result.beta[i];
    tri(i + 1, i) = lanczos_result.beta[i];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri);
  ProbeQuadrature q;
  q.values.resize(n);
  q.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    q.values[i] = es.eigenvalues()(i);
    const double t = es.eigenvectors()(0, i);
    q.weights[i] = t * t;
  }
  return q;
}

namespace {

SpectrumEstimate finish_estimate(std::vector<ProbeQuadrature> probes, int bins, int steps,
                                 uint64_t probe_seed) {
  SpectrumEstimate est;
  est.probes = std::move(probes);
  est.n_probes = static_cast<int>(est.probes.size());
  est.lanczos_steps = steps;
  est.probe_seed = probe_seed;

  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (const auto& p : est.probes)
    for (double v : p.values) {
      lo = first ? v : std::min(lo, v);
      hi = first ? v : std::max(hi, v);
      first = false;
    }
  est.lambda_min = lo;
  est.lambda_max = hi;

  double sigma = (hi - lo) / bins;
  if (!(sigma > 0.0)) sigma = std::max(1.0, std::fabs(hi)) * 1e-9;

  est.bin_edges.resize(bins + 1);
  const double left = lo - 4.0 * sigma, right = hi + 4.0 * sigma;
  for (int b = 0; b <= bins; ++b)
    est.bin_edges[b] = left + (right - left) * b / bins;
  est.mass = mass_on_edges(est.probes, sigma, est.bin_edges);
  return est;
}

double sigma_of(const SpectrumEstimate& e) {
  const int bins = static_cast<int>(e.mass.size());
  double s = (e.lambda_max - e.lambda_min) / bins;
  if (!(s > 0.0)) s = std::max(1.0, std::fabs(e.lambda_max)) * 1e-9;
  return s;
}

}  // namespace

SpectrumEstimate slq_density(const HvpFn& oracle, size_t dim, const SlqSettings& settings) {
  if (settings.n_probes < 1) throw Error("slq: need at least one probe");
  const int m = std::min<int>(settings.lanczos_steps, static_cast<int>(dim));
  std::vector<ProbeQuadrature> probes;
  for (int p = 0; p < settings.n_probes; ++p) {
    const auto lz = lanczos(oracle, dim, m, derive_seed(settings.probe_seed, p));
    probes.push_back(ritz_quadrature(lz));
  }
  return finish_estimate(std::move(probes), settings.bins, m, settings.probe_seed);
}

SpectrumEstimate slq_density(const ModelSpec& model, const std::vector<double>& params,
                             const Mask& mask, const Dataset& data, int batch_size,
                             const SlqSettings& settings, bool restricted) {
  if (restricted) {
    auto oracle = masked_dataset_hvp(model, params, mask, data, batch_size);
    return slq_density(oracle, mask.active_count, settings);
  }
  auto oracle = dataset_hvp(model, params, data, batch_size);
  return slq_density(oracle, params.size(), settings);
}

SpectrumEstimate density_from_eigenvalues(const std::vector<double>& eigenvalues, int bins) {
  if (eigenvalues.empty()) throw Error("empty eigenvalue list");
  ProbeQuadrature q;
  q.values = eigenvalues;
  q.weights.assign(eigenvalues.size(), 1.0 / static_cast<double>(eigenvalues.size()));
  return finish_estimate({std::move(q)}, bins, 0, 0);
}

std::vector<double> dense_eigenvalues(const HvpFn& oracle, size_t dim) {
  Eigen::MatrixXd h(dim, dim);
  std::vector<double> e(dim, 0.0);
  for (size_t j = 0; j < dim; ++j) {
    e[j] = 1.0;
    const auto col = oracle(e);
    e[j] = 0.0;
    for (size_t i = 0; i < dim; ++i) h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
  }
  const Eigen::MatrixXd sym = 0.5 * (h + h.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  return std::vector<double>(es.eigenvalues().data(), es.eigenvalues().data() + dim);
}

double histogram_l1(const SpectrumEstimate& a, const SpectrumEstimate& b) {
  const int bins = static_cast<int>(std::max(a.mass.size(), b.mass.size()));
  const double lo = std::min(a.bin_edges.front(), b.bin_edges.front());
  const double hi = std::max(a.bin_edges.back(), b.bin_edges.back());
  std::vector<double> edges(bins + 1);
  for (int i = 0; i <= bins; ++i) edges[i] = lo + (hi - lo) * i / bins;
  const auto ma = mass_on_edges(a.probes, sigma_of(a), edges);
  const auto mb = mass_on_edges(b.probes, sigma_of(b), edges);
  double l1 = 0.0;
  for (int i = 0; i < bins; ++i) l1 += std::fabs(ma[i] - mb[i]);
  return l1;
}

FlatnessReport flatness(const SpectrumEstimate& estimate, double eps_rel) {
  FlatnessReport rep;
  rep.eps_rel = eps_rel;
  rep.lambda_min = estimate.lambda_min;
  rep.lambda_max = estimate.lambda_max;
  const double max_abs = std::max(std::fabs(estimate.lambda_min), std::fabs(estimate.lambda_max));
  if (max_abs == 0.0) {
    rep.degenerate = true;
    rep.near_zero_mass = 1.0;
    return rep;
  }
  const double cut = eps_rel * max_abs;
  for (size_t b = 0; b < estimate.mass.size(); ++b) {
    const double center = 0.5 * (estimate.bin_edges[b] + estimate.bin_edges[b + 1]);
    if (std::fabs(center) <= cut) rep.near_zero_mass += estimate.mass[b];
  }
  return rep;
}

std::vector<SpectrumCell> spectrum_experiment(const ModelSpec& model,
                                              const std::vector<double>& w0,
                                              const std::vector<int>& k_list,
                                              const std::vector<double>& r_list,
                                              const TrainRecipe& recipe, const Dataset& train_set,
                                              const Dataset& test_set, const SlqSettings& settings,
                                              double eps_rel, const CheckpointStore* store,
                                              bool restricted) {
  if (k_list.empty() || r_list.empty()) throw Error("spectrum_experiment: empty k/R list");
  std::vector<SpectrumCell> table;
  for (int k : k_list) {
    const auto wu = warmup(model, w0, k, recipe, train_set, test_set, store);

    for (double r : r_list) {
      const auto ilot = i_lot_r(model, wu.wk, r, 1, recipe, train_set, test_set, k);
      const auto masked_point = apply_mask(wu.wk, ilot.final_mask);
      SpectrumCell cell;
      cell.k = k;
      cell.r_percent = r;
      cell.estimate = slq_density(model, masked_point, ilot.final_mask, train_set,
                                  recipe.batch_size, settings, restricted);
      cell.report = flatness(cell.estimate, eps_rel);
      table.push_back(std::move(cell));
    }

    SpectrumCell ref;
    ref.k = k;
    ref.reference = true;
    ref.estimate = slq_density(model, wu.wk, Mask::all_ones(model.param_count), train_set,
                               recipe.batch_size, settings, restricted);
    ref.report = flatness(ref.estimate, eps_rel);
    table.push_back(std::move(ref));
  }
  return table;
}

}  // namespace llab
