#include "llab/flops.hpp"

#include <algorithm>

namespace llab {

std::vector<LayerCost> layer_costs(const ModelSpec& model) {
  std::vector<LayerCost> costs;
  for (const auto& slice : model.layout) {
    if (!slice.is_weight) continue;
    const auto& layer = model.layers[slice.layer];
    LayerCost c;
    c.layer = slice.layer;
    c.weight_count = slice.count;
    c.weight_offset = slice.offset;
    if (layer.kind == LayerKind::Dense) {
      c.positions = 1;
    } else {  // Conv2d
      c.positions = static_cast<uint64_t>(layer.out_shape[1]) * layer.out_shape[2];
    }
    const uint64_t macs = 2ull * c.weight_count * c.positions;
    c.fwd = macs;
    c.act_grad = macs;
    c.w_grad = macs;
    costs.push_back(c);
  }
  return costs;
}

namespace {

size_t active_in_slice(const Mask& mask, size_t offset, size_t count) {
  size_t n = 0;
  for (size_t i = 0; i < count; ++i) n += mask.bits[offset + i];
  return n;
}

}  // namespace

uint64_t epoch_backward_flops(const ModelSpec& model, uint64_t n_samples, const Mask* mask) {
  uint64_t total = 0;
  for (const auto& c : layer_costs(model)) {
    uint64_t w_grad = c.w_grad;
    if (mask != nullptr)
      w_grad = 2ull * active_in_slice(*mask, c.weight_offset, c.weight_count) * c.positions;
    total += (c.act_grad + w_grad) * n_samples;
  }
  return total;
}

uint64_t epoch_forward_flops(const ModelSpec& model, uint64_t n_samples, const Mask* mask) {
  uint64_t total = 0;
  for (const auto& c : layer_costs(model)) {
    uint64_t fwd = c.fwd;
    if (mask != nullptr)
      fwd = 2ull * active_in_slice(*mask, c.weight_offset, c.weight_count) * c.positions;
    total += fwd * n_samples;
  }
  return total;
}

void accrue_epoch(PhaseFlops& phase, const ModelSpec& model, uint64_t n_samples,
                  const Mask* mask) {
  for (const auto& c : layer_costs(model)) {
    uint64_t w_grad = c.w_grad;
    uint64_t fwd = c.fwd;
    if (mask != nullptr) {
      const uint64_t active = active_in_slice(*mask, c.weight_offset, c.weight_count);
      w_grad = 2ull * active * c.positions;
      fwd = 2ull * active * c.positions;
    }
    phase.fwd += fwd * n_samples;
    phase.act_grad += c.act_grad * n_samples;
    phase.w_grad += w_grad * n_samples;
  }
  phase.epochs += 1;
}

std::vector<ParetoPoint> pareto_points(const std::vector<std::pair<uint64_t, double>>& runs) {
  if (runs.empty()) throw Error("pareto_points: empty run list");
  std::vector<ParetoPoint> pts(runs.size());
  for (size_t i = 0; i < runs.size(); ++i)
    pts[i] = {runs[i].first, runs[i].second, i, false};
  for (auto& p : pts) {
    for (const auto& q : pts) {
      if (q.index == p.index) continue;
      const bool no_worse = q.flops <= p.flops && q.accuracy >= p.accuracy;
      const bool strict = q.flops < p.flops || q.accuracy > p.accuracy;
      if (no_worse && strict) {
        p.dominated = true;
        break;
      }
    }
  }
  std::sort(pts.begin(), pts.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
    if (a.flops != b.flops) return a.flops < b.flops;
    return a.index < b.index;
  });
  return pts;
}

}  // namespace llab
