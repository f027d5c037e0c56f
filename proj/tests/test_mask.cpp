#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include "llab/common.hpp"
#include "llab/mask.hpp"
#include "llab/model.hpp"

using namespace llab;

namespace {

// Independent oracle: rank (|w|, -index) pairs of active weights and keep
// the top ceil(r/100 * active).
Mask prune_oracle(const std::vector<double>& params, double r, const Mask& prior,
                  const std::vector<uint8_t>& is_weight) {
  std::vector<size_t> active;
  for (size_t i = 0; i < params.size(); ++i)
    if (prior.bits[i] && is_weight[i]) active.push_back(i);
  size_t keep = static_cast<size_t>(std::ceil(r / 100.0 * static_cast<double>(active.size())));
  keep = std::max<size_t>(keep, 1);
  keep = std::min(keep, active.size());
  std::sort(active.begin(), active.end(), [&](size_t a, size_t b) {
    double ma = std::fabs(params[a]), mb = std::fabs(params[b]);
    if (ma != mb) return ma > mb;
    return a < b;
  });
  Mask out;
  out.bits.assign(params.size(), 0);
  for (size_t i = 0; i < params.size(); ++i)
    if (prior.bits[i] && !is_weight[i]) out.bits[i] = 1;
  for (size_t i = 0; i < keep; ++i) out.bits[active[i]] = 1;
  out.recount();
  return out;
}

}  // namespace

TEST_CASE("magnitude_prune: hand-worked 6-weight example") {
  // |w| = 3, 1, 4, 1, 5, 2; keep ceil(0.5*6) = 3 -> indices 4, 2, 0.
  std::vector<double> w = {3.0, -1.0, 4.0, 1.0, -5.0, 2.0};
  auto m = magnitude_prune(w, 50.0, Mask::all_ones(6));
  CHECK(m.active_count == 3u);
  CHECK(m.bits == std::vector<uint8_t>{1, 0, 1, 0, 1, 0});
}

TEST_CASE("magnitude_prune: tie broken toward lower index") {
  std::vector<double> w = {2.0, -2.0, 2.0, 0.5};
  auto m = magnitude_prune(w, 50.0, Mask::all_ones(4));  // keep 2 of 4
  CHECK(m.bits == std::vector<uint8_t>{1, 1, 0, 0});
}

TEST_CASE("magnitude_prune: never drops to zero weights") {
  std::vector<double> w = {1.0, 2.0, 3.0};
  auto m = magnitude_prune(w, 1e-9, Mask::all_ones(3));
  CHECK(m.active_count == 1u);
  CHECK(m.bits[2] == 1);
}

TEST_CASE("magnitude_prune: biases keep their bits and don't compete") {
  auto model = make_dense(2, 2, 2);  // 4 weights + 2 biases
  std::vector<double> params = {0.1, 9.0, 8.0, 0.2, 100.0, 100.0};
  auto m = magnitude_prune(params, 50.0, Mask::all_ones(6), model.is_weight);
  CHECK(m.bits == std::vector<uint8_t>{0, 1, 1, 0, 1, 1});
  CHECK(m.active_count == 4u);
  CHECK(active_weight_count(m, model.is_weight) == 2u);
}

TEST_CASE("magnitude_prune: result is a sub-mask of the prior") {
  Rng rng(99);
  std::vector<double> w(200);
  for (auto& x : w) x = rng.gaussian();
  auto m1 = magnitude_prune(w, 60.0, Mask::all_ones(200));
  auto m2 = magnitude_prune(w, 60.0, m1);
  for (size_t i = 0; i < 200; ++i) CHECK(m2.bits[i] <= m1.bits[i]);
  CHECK(m2.active_count == static_cast<size_t>(std::ceil(0.6 * m1.active_count)));
}

TEST_CASE("magnitude_prune: compounding matches ceil arithmetic (1000 -> 250)") {
  Rng rng(3);
  std::vector<double> w(1000);
  for (auto& x : w) x = rng.gaussian();
  auto m1 = magnitude_prune(w, 50.0, Mask::all_ones(1000));
  CHECK(m1.active_count == 500u);
  auto m2 = magnitude_prune(w, 50.0, m1);
  CHECK(m2.active_count == 250u);
}

TEST_CASE("magnitude_prune agrees with an independent oracle") {
  auto model = make_mlp("t", 7, {5}, 3);
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> params(model.param_count);
    for (auto& x : params) x = rng.gaussian();
    // Random ties to stress the ordering rule.
    for (size_t i = 0; i + 3 < params.size(); i += 7) params[i + 3] = params[i];
    Mask prior = Mask::all_ones(model.param_count);
    double r = 10.0 + 85.0 * rng.uniform();
    for (int round = 0; round < 3; ++round) {
      auto got = magnitude_prune(params, r, prior, model.is_weight);
      auto want = prune_oracle(params, r, prior, model.is_weight);
      REQUIRE(got.bits == want.bits);
      prior = got;
    }
  }
}

TEST_CASE("magnitude_prune: r out of range rejected") {
  std::vector<double> w = {1.0, 2.0};
  CHECK_THROWS_AS(static_cast<void>(magnitude_prune(w, 0.0, Mask::all_ones(2))), Error);
  CHECK_THROWS_AS(static_cast<void>(magnitude_prune(w, 101.0, Mask::all_ones(2))), Error);
  CHECK_THROWS_AS(static_cast<void>(magnitude_prune(w, -5.0, Mask::all_ones(2))), Error);
}

TEST_CASE("apply_mask gives exact zeros") {
  std::vector<double> w = {1e-300, -2.5, 3.0};
  Mask m;
  m.bits = {0, 1, 0};
  m.recount();
  auto out = apply_mask(w, m);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == -2.5);
  CHECK(out[2] == 0.0);
}

TEST_CASE("lot_update keeps inactive entries at exact zero") {
  std::vector<double> w = {1.0, 0.0, 3.0};
  std::vector<double> u = {0.25, 7.0, -1.0};
  Mask m;
  m.bits = {1, 0, 1};
  m.recount();
  auto out = lot_update(w, u, m);
  CHECK(out[0] == 0.75);
  CHECK(out[1] == 0.0);
  CHECK(out[2] == 4.0);
}

TEST_CASE("rise_update pins inactive entries to the frozen snapshot bit-exactly") {
  std::vector<double> w = {1.0, 123.0, 3.0};
  std::vector<double> u = {0.25, 7.0, -1.0};
  FrozenReference frozen{{0.1 + 0.2, -4.0, 9.0}};  // 0.30000000000000004
  Mask m;
  m.bits = {1, 0, 1};
  m.recount();
  auto out = rise_update(w, u, m, frozen);
  CHECK(out[0] == 0.75);
  CHECK(out[1] == frozen.values[1]);
  CHECK(std::memcmp(&out[1], &frozen.values[1], sizeof(double)) == 0);
  CHECK(out[2] == 4.0);
}

TEST_CASE("mask save/load round trip") {
  auto dir = std::filesystem::temp_directory_path() / "llab_mask_test";
  std::filesystem::create_directories(dir);
  auto path = dir / "m.mask";

  Rng rng(5);
  Mask m;
  m.bits.resize(261);  // not a multiple of 8 on purpose
  for (auto& b : m.bits) b = rng.uniform() < 0.3 ? 1 : 0;
  m.recount();
  save_mask(path, m, MaskProvenance{25.0, 2, 10});

  auto back = load_mask(path);
  CHECK(back.bits == m.bits);
  CHECK(back.active_count == m.active_count);
  CHECK(std::filesystem::exists(path.string() + ".json"));

  std::filesystem::remove_all(dir);
}

TEST_CASE("load_mask rejects truncated files") {
  auto dir = std::filesystem::temp_directory_path() / "llab_mask_trunc";
  std::filesystem::create_directories(dir);
  auto path = dir / "bad.mask";
  {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    REQUIRE(f != nullptr);
    uint64_t n = 1000;
    std::fwrite(&n, sizeof(n), 1, f);
    uint8_t byte = 0xff;
    std::fwrite(&byte, 1, 1, f);  // needs 125 bytes, gets 1
    std::fclose(f);
  }
  CHECK_THROWS_AS(static_cast<void>(load_mask(path)), Error);
  std::filesystem::remove_all(dir);
}
