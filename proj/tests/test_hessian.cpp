#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "llab/dataset.hpp"
#include "llab/hessian.hpp"
#include "llab/model.hpp"

using namespace llab;

namespace {

HvpFn matrix_oracle(const std::vector<std::vector<double>>& a) {
  return [a](const std::vector<double>& v) {
    std::vector<double> out(a.size(), 0.0);
    for (size_t i = 0; i < a.size(); ++i)
      for (size_t j = 0; j < a.size(); ++j) out[i] += a[i][j] * v[j];
    return out;
  };
}

std::vector<std::vector<double>> random_symmetric(size_t n, uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i; j < n; ++j) a[i][j] = a[j][i] = rng.gaussian();
  return a;
}

Batch dummy_batch(int dim) {
  Batch b;
  b.inputs = Tensor<double>({1, dim});
  b.labels = {0};
  return b;
}

}  // namespace

TEST_CASE("lanczos + ritz_quadrature recover diag(1,2,3) exactly") {
  auto oracle = matrix_oracle({{1, 0, 0}, {0, 2, 0}, {0, 0, 3}});
  auto lz = lanczos(oracle, 3, 3, 42);
  CHECK(lz.steps == 3);
  CHECK_FALSE(lz.breakdown);
  auto q = ritz_quadrature(lz);
  std::vector<double> vals = q.values;
  std::sort(vals.begin(), vals.end());
  CHECK(vals[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(vals[1] == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(vals[2] == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(std::accumulate(q.weights.begin(), q.weights.end(), 0.0) ==
        doctest::Approx(1.0).epsilon(1e-12));
  // First quadrature moment equals v' A v for the unit Rademacher probe:
  // squared components are exactly 1/3 each, so the moment is (1+2+3)/3.
  double moment = 0.0;
  for (size_t i = 0; i < q.values.size(); ++i) moment += q.weights[i] * q.values[i];
  CHECK(moment == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("lanczos breaks down immediately on the identity") {
  auto oracle = [](const std::vector<double>& v) { return v; };
  auto lz = lanczos(oracle, 10, 5, 7);
  CHECK(lz.breakdown);
  CHECK(lz.steps == 1);
  CHECK(lz.breakdown_step == 1);
  auto q = ritz_quadrature(lz);
  REQUIRE(q.values.size() == 1u);
  CHECK(q.values[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(q.weights[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("lanczos input validation") {
  auto oracle = [](const std::vector<double>& v) { return v; };
  CHECK_THROWS_AS(static_cast<void>(lanczos(oracle, 10, 0, 1)), Error);
  CHECK_THROWS_AS(static_cast<void>(lanczos(oracle, 10, 11, 1)), Error);
}

TEST_CASE("full-rank lanczos matches a dense eigensolve on a random 50x50") {
  const auto a = random_symmetric(50, 11);
  auto oracle = matrix_oracle(a);
  auto eigs = dense_eigenvalues(oracle, 50);  // ascending
  auto q = ritz_quadrature(lanczos(oracle, 50, 50, 99));
  std::vector<double> ritz = q.values;
  std::sort(ritz.begin(), ritz.end());
  REQUIRE(ritz.size() == 50u);
  double worst = 0.0;
  for (size_t i = 0; i < 50; ++i) worst = std::max(worst, std::fabs(ritz[i] - eigs[i]));
  CHECK(worst <= 1e-6);
}

TEST_CASE("embed/project round trip") {
  Mask m;
  m.bits = {1, 0, 0, 1, 1};
  m.recount();
  std::vector<double> active = {1.0, 2.0, 3.0};
  auto full = embed_active(m, active);
  CHECK(full == std::vector<double>{1.0, 0.0, 0.0, 2.0, 3.0});
  CHECK(project_active(m, full) == active);
  CHECK_THROWS_AS(static_cast<void>(embed_active(m, {1.0})), Error);
}

TEST_CASE("masked_hvp restricts a separable quadratic to diag(2, 6)") {
  auto model = make_quadratic({2.0, 4.0, 6.0});
  std::vector<double> params = {0.3, -0.7, 1.1};
  Mask m;
  m.bits = {1, 0, 1};
  m.recount();
  auto batch = dummy_batch(3);

  auto h1 = masked_hvp(model, params, m, batch, {1.0, 0.0});
  CHECK(h1[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(h1[1] == doctest::Approx(0.0).epsilon(1e-12));
  auto h2 = masked_hvp(model, params, m, batch, {0.0, 1.0});
  CHECK(h2[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(h2[1] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("masked_dataset_hvp equals the projected dense Hessian on a tiny MLP") {
  DatasetSpec spec;
  spec.n_classes = 3;
  spec.dim = 4;
  spec.n_train = 24;
  spec.n_test = 6;
  auto data = make_blobs(spec);
  auto model = make_mlp("t", 4, {5}, 3);
  auto params = init_params(model, 21);

  auto full = dataset_hvp(model, params, data.train, 8);
  Mask m = Mask::all_ones(model.param_count);
  Rng rng(5);
  for (auto& b : m.bits) b = rng.uniform() < 0.5 ? 1 : 0;
  m.recount();
  // The restricted operator must act at the masked point.
  auto masked_params = apply_mask(params, m);
  auto full_at_masked = dataset_hvp(model, masked_params, data.train, 8);
  auto restricted = masked_dataset_hvp(model, masked_params, m, data.train, 8);

  Rng vr(6);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> v(m.active_count);
    for (auto& x : v) x = vr.gaussian();
    auto got = restricted(v);
    auto want = project_active(m, full_at_masked(embed_active(m, v)));
    REQUIRE(got.size() == want.size());
    for (size_t i = 0; i < got.size(); ++i)
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
  // And it genuinely differs from the unmasked operator restricted naively.
  std::vector<double> ones(m.active_count, 1.0);
  auto a = restricted(ones);
  auto b = project_active(m, full(embed_active(m, ones)));
  bool differs = false;
  for (size_t i = 0; i < a.size(); ++i)
    if (std::fabs(a[i] - b[i]) > 1e-9) differs = true;
  CHECK(differs);
}

TEST_CASE("slq density on a diagonal operator matches the exact histogram") {
  // Rademacher probes put exactly 1/dim squared weight on every
  // eigenvector of a diagonal matrix, so 50-step SLQ is exact here.
  std::vector<std::vector<double>> a(50, std::vector<double>(50, 0.0));
  std::vector<double> eigs(50);
  for (int i = 0; i < 50; ++i) {
    eigs[i] = -2.0 + 4.0 * i / 49.0;
    a[i][i] = eigs[i];
  }
  SlqSettings s;
  s.n_probes = 4;
  s.lanczos_steps = 50;
  s.bins = 101;
  auto est = slq_density(matrix_oracle(a), 50, s);
  CHECK(est.lambda_min == doctest::Approx(-2.0).epsilon(1e-8));
  CHECK(est.lambda_max == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(std::accumulate(est.mass.begin(), est.mass.end(), 0.0) ==
        doctest::Approx(1.0).epsilon(1e-9));
  auto exact = density_from_eigenvalues(eigs, 101);
  CHECK(histogram_l1(est, exact) <= 1e-6);
  CHECK(histogram_l1(est, est) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("slq density is deterministic in the probe seed") {
  const auto a = random_symmetric(30, 13);
  auto oracle = matrix_oracle(a);
  SlqSettings s;
  s.n_probes = 3;
  s.lanczos_steps = 20;
  s.bins = 41;
  auto e1 = slq_density(oracle, 30, s);
  auto e2 = slq_density(oracle, 30, s);
  CHECK(e1.mass == e2.mass);
  CHECK(e1.bin_edges == e2.bin_edges);
  s.probe_seed = 999;
  auto e3 = slq_density(oracle, 30, s);
  CHECK(e1.mass != e3.mass);
}

TEST_CASE("flatness: uniform spectrum has ~eps of near-zero mass") {
  std::vector<double> eigs(2001);
  for (int i = 0; i < 2001; ++i) eigs[i] = -1.0 + 2.0 * i / 2000.0;
  auto est = density_from_eigenvalues(eigs, 400);
  auto rep = flatness(est, 0.1);
  CHECK_FALSE(rep.degenerate);
  CHECK(rep.near_zero_mass == doctest::Approx(0.1).epsilon(0.15));
}

TEST_CASE("flatness: spectrum far from zero reports zero near-zero mass") {
  auto est = density_from_eigenvalues({3.0, 5.0}, 101);
  auto rep = flatness(est, 0.01);
  CHECK(rep.near_zero_mass == 0.0);
  CHECK(rep.lambda_max == doctest::Approx(5.0));
}

TEST_CASE("flatness: all-zero spectrum is degenerate") {
  auto est = density_from_eigenvalues({0.0, 0.0, 0.0}, 11);
  auto rep = flatness(est, 0.01);
  CHECK(rep.degenerate);
  CHECK(rep.near_zero_mass == 1.0);
}

TEST_CASE("spectrum_experiment: table layout and flatter masked rows") {
  DatasetSpec spec;
  spec.n_classes = 3;
  spec.dim = 8;
  spec.n_train = 120;
  spec.n_test = 30;
  spec.cluster_std = 0.6;
  spec.center_scale = 1.5;
  auto data = make_blobs(spec);
  auto model = make_mlp("t", 8, {10}, 3);
  auto w0 = init_params(model, 31);
  TrainRecipe recipe;
  recipe.epochs = 3;
  recipe.batch_size = 30;
  recipe.lr.kind = LrKind::Constant;
  recipe.lr.base = 0.05;
  recipe.lr.total_epochs = 3;
  recipe.seed = 3;

  SlqSettings s;
  s.n_probes = 2;
  s.lanczos_steps = 15;
  s.bins = 51;
  auto table = spectrum_experiment(model, w0, {0, 2}, {20.0, 60.0}, recipe, data.train,
                                   data.test, s, 0.05);
  REQUIRE(table.size() == 2u * 3u);
  CHECK(table[0].k == 0);
  CHECK(table[0].r_percent == 20.0);
  CHECK_FALSE(table[0].reference);
  CHECK(table[2].reference);
  CHECK(table[5].k == 2);
  CHECK(table[5].reference);
  for (const auto& cell : table) {
    CHECK(std::accumulate(cell.estimate.mass.begin(), cell.estimate.mass.end(), 0.0) ==
          doctest::Approx(1.0).epsilon(1e-9));
    CHECK(cell.report.eps_rel == 0.05);
  }
}
