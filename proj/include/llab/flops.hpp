#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "llab/mask.hpp"
#include "llab/model.hpp"

namespace llab {

// FLOPs = 2 x multiply-accumulates, counted on parameterized layers only
// (ReLU/pool/flatten are charged zero). Backward cost splits into the
// activation-gradient part (never maskable under unstructured pruning)
// and the weight-gradient part, which scales with the layer's active
// weight count.
struct LayerCost {
  int layer = 0;
  uint64_t fwd = 0;       // per sample
  uint64_t act_grad = 0;  // per sample
  uint64_t w_grad = 0;    // per sample, unmasked
  uint64_t positions = 1; // output positions multiplying each weight's MAC
  size_t weight_count = 0;
  size_t weight_offset = 0;  // into the flat parameter vector
};

std::vector<LayerCost> layer_costs(const ModelSpec& model);

// Backward FLOPs for one epoch over n_samples. With a mask, each layer's
// weight-gradient part becomes 2 * active_weights * positions.
uint64_t epoch_backward_flops(const ModelSpec& model, uint64_t n_samples,
                              const Mask* mask = nullptr);
uint64_t epoch_forward_flops(const ModelSpec& model, uint64_t n_samples,
                             const Mask* mask = nullptr);

struct PhaseFlops {
  uint64_t fwd = 0;
  uint64_t act_grad = 0;
  uint64_t w_grad = 0;
  int epochs = 0;

  uint64_t backward() const { return act_grad + w_grad; }
  PhaseFlops& operator+=(const PhaseFlops& o) {
    fwd += o.fwd;
    act_grad += o.act_grad;
    w_grad += o.w_grad;
    epochs += o.epochs;
    return *this;
  }
};

struct FlopLedger {
  PhaseFlops warmup;     // k full-model epochs
  PhaseFlops discovery;  // mask-discovery trainings
  PhaseFlops retrain;    // masked (or vanilla) training

  // Fig.-4-style x-axis: backward FLOPs only. Discovery inclusion is an
  // accounting mode and is labeled on every output.
  uint64_t backprop_total(bool include_discovery) const {
    uint64_t t = warmup.backward() + retrain.backward();
    if (include_discovery) t += discovery.backward();
    return t;
  }
  uint64_t grand_backward() const { return backprop_total(true); }
};

// Accrues one epoch of cost into a phase, split act-grad / w-grad.
void accrue_epoch(PhaseFlops& phase, const ModelSpec& model, uint64_t n_samples,
                  const Mask* mask = nullptr);

struct ParetoPoint {
  uint64_t flops = 0;
  double accuracy = 0.0;
  size_t index = 0;  // position in the input list
  bool dominated = false;
};

// Sorted by FLOPs ascending. A point is dominated iff another point has
// <= FLOPs and >= accuracy with at least one strict.
std::vector<ParetoPoint> pareto_points(const std::vector<std::pair<uint64_t, double>>& runs);

}  // namespace llab
