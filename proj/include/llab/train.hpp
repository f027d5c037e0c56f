#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "llab/checkpoint.hpp"
#include "llab/dataset.hpp"
#include "llab/flops.hpp"
#include "llab/graph.hpp"
#include "llab/mask.hpp"
#include "llab/model.hpp"
#include "llab/optim.hpp"

namespace llab {

struct TrainRecipe {
  int epochs = 20;
  int batch_size = 100;
  double momentum = 0.9;
  double weight_decay = 5e-5;
  LrSchedule lr;
  uint64_t seed = 1;
};

struct UpdateRule {
  enum class Kind { Vanilla, Lot, Rise };
  Kind kind = Kind::Vanilla;
  Mask mask;
  FrozenReference frozen;

  static UpdateRule vanilla() { return {}; }
  static UpdateRule lot(Mask m) { return {Kind::Lot, std::move(m), {}}; }
  static UpdateRule rise(Mask m, FrozenReference f) { return {Kind::Rise, std::move(m), std::move(f)}; }
};

enum class Phase { Warmup, Discovery, Retrain };

struct RunResult {
  std::vector<double> final_params;
  Mask mask;  // all-ones for vanilla runs
  double test_accuracy = 0.0;
  std::vector<double> train_loss;
  std::vector<double> test_loss;
  std::vector<double> test_acc;
  FlopLedger ledger;
  double wall_clock_sec = 0.0;
  uint64_t seed = 0;
  std::string algorithm = "vanilla";
};

struct TrainOptions {
  // Wall-epoch offset: the LR schedule and data-order streams follow
  // epoch_offset + local epoch, so a rewound run resumes the recipe's
  // schedule position instead of restarting it.
  int epoch_offset = 0;
  Phase phase = Phase::Retrain;
  std::vector<double> initial_momentum;  // empty = fresh buffers
  const CheckpointStore* record_store = nullptr;  // save W^e after each epoch
  std::function<void(int step, const std::vector<double>& params)> on_step;
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};
EvalResult evaluate(const ModelSpec& model, const std::vector<double>& params,
                    const Dataset& data, int batch_size);

// Runs epochs x batches SGD steps under the selected update rule.
RunResult train(const ModelSpec& model, std::vector<double> params, const TrainRecipe& recipe,
                const Dataset& train_set, const Dataset& test_set, const UpdateRule& rule,
                const TrainOptions& opts = {});

// Trains the full model for k epochs, recording W^e (and momentum) for
// every e in [0, k] when a store is given; resumes from the latest
// recorded epoch <= k, which is bit-exact because each epoch's data
// order is derived statelessly from (seed, wall epoch).
struct WarmupResult {
  std::vector<double> wk;
  std::vector<double> momentum;
  PhaseFlops flops;  // always k full-model epochs, independent of reuse
};
WarmupResult warmup(const ModelSpec& model, const std::vector<double>& w0, int k,
                    const TrainRecipe& recipe, const Dataset& train_set, const Dataset& test_set,
                    const CheckpointStore* store = nullptr);

// Alg. 1: I rounds of {rewind to W0 * M, masked training, magnitude
// prune to R% of the active weights}.
struct IlotIteration {
  Mask mask_after;
  std::vector<double> start_params;  // post-rewind parameters, for audit
  RunResult run;
};
struct IlotResult {
  Mask final_mask;
  std::vector<IlotIteration> iterations;
};
IlotResult i_lot_r(const ModelSpec& model, const std::vector<double>& w0, double r_percent,
                   int iterations, const TrainRecipe& recipe, const Dataset& train_set,
                   const Dataset& test_set, int epoch_offset = 0);

// Alg. 3: full training from W^k, prune to R%, retrain from W^k with the
// non-winners frozen at W^k.
struct RiseResult {
  Mask mask;
  RunResult discovery;
  RunResult masked;
};
RiseResult rise_r(const ModelSpec& model, const std::vector<double>& wk, double r_percent,
                  const TrainRecipe& recipe, const Dataset& train_set, const Dataset& test_set,
                  int epoch_offset = 0);

// Alg. 2: k warm-up epochs, then I-LOT-R or RISE-R from W^k; the
// returned run is the masked performance training, with warm-up and
// discovery costs merged into its ledger.
struct Method {
  enum class Kind { Ilot, Rise } kind = Kind::Ilot;
  double r_percent = 100.0;
  int iterations = 1;
};
struct DispatchResult {
  Mask mask;
  RunResult final_run;
};
DispatchResult warmup_and_dispatch(const ModelSpec& model, const std::vector<double>& w0, int k,
                                   const TrainRecipe& recipe, const Dataset& train_set,
                                   const Dataset& test_set, const Method& method,
                                   const CheckpointStore* store = nullptr,
                                   bool schedule_restart_local = false);

}  // namespace llab
