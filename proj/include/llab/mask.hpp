#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "llab/common.hpp"

namespace llab {

// Binary mask over the flat parameter vector. A parameter is active
// (trainable) iff its bit is 1. Biases always carry bit 1.
struct Mask {
  std::vector<uint8_t> bits;
  size_t active_count = 0;

  size_t size() const { return bits.size(); }

  static Mask all_ones(size_t n) {
    Mask m;
    m.bits.assign(n, 1);
    m.active_count = n;
    return m;
  }

  void recount() {
    active_count = 0;
    for (uint8_t b : bits) active_count += b;
  }
};

// Active 1-bits restricted to weight entries.
size_t active_weight_count(const Mask& mask, const std::vector<uint8_t>& is_weight);

// Global magnitude pruning over the currently-active weight entries:
// keeps the ceil(R/100 * active_weight_count) largest by |w| (never fewer
// than 1), ties broken toward the lower flat index. Bias entries keep
// their prior bits. The result is always a sub-mask of `prior`.
Mask magnitude_prune(const std::vector<double>& params, double r_percent, const Mask& prior,
                     const std::vector<uint8_t>& is_weight);

// Convenience overload treating every entry as a weight.
Mask magnitude_prune(const std::vector<double>& params, double r_percent, const Mask& prior);

// Elementwise product; masked-out entries become exactly 0.
std::vector<double> apply_mask(const std::vector<double>& params, const Mask& mask);

// Eq.-(1)-style masked step: active entries take w - u, inactive are 0.
std::vector<double> lot_update(const std::vector<double>& params, const std::vector<double>& u,
                               const Mask& mask);

// Freeze reference for the RISE rule: the W^k snapshot inactive entries
// are pinned to.
struct FrozenReference {
  std::vector<double> values;
};

// Eq.-(2)-style masked step: active entries take w - u, inactive entries
// are restored to the frozen reference bit-exactly.
std::vector<double> rise_update(const std::vector<double>& params, const std::vector<double>& u,
                                const Mask& mask, const FrozenReference& frozen);

// Mask file format: 8-byte little-endian N, then ceil(N/8) bytes of bits
// (LSB-first), plus a JSON sidecar <path>.json with active_count and
// provenance.
struct MaskProvenance {
  double r_percent = 100.0;
  int iteration = 0;
  int warmup_epochs = 0;
};
void save_mask(const std::filesystem::path& path, const Mask& mask, const MaskProvenance& prov);
Mask load_mask(const std::filesystem::path& path);

}  // namespace llab
