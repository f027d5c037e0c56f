#include "llab/mask.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "nlohmann/json.hpp"

namespace llab {

size_t active_weight_count(const Mask& mask, const std::vector<uint8_t>& is_weight) {
  if (mask.size() != is_weight.size()) throw Error("mask/is_weight length mismatch");
  size_t n = 0;
  for (size_t i = 0; i < mask.size(); ++i) n += (mask.bits[i] && is_weight[i]) ? 1 : 0;
  return n;
}

Mask magnitude_prune(const std::vector<double>& params, double r_percent, const Mask& prior,
                     const std::vector<uint8_t>& is_weight) {
  if (params.size() != prior.size() || params.size() != is_weight.size())
    throw Error("magnitude_prune: length mismatch");
  if (!(r_percent > 0.0 && r_percent <= 100.0)) throw Error("R out of range (0, 100]");

  std::vector<size_t> active;
  for (size_t i = 0; i < params.size(); ++i)
    if (prior.bits[i] && is_weight[i]) active.push_back(i);
  if (active.empty()) throw Error("magnitude_prune: no active weights in prior mask");

  size_t keep = static_cast<size_t>(std::ceil(r_percent / 100.0 * active.size()));
  keep = std::max<size_t>(1, std::min(keep, active.size()));

  // Largest magnitude first; equal magnitudes keep the lower flat index.
  std::sort(active.begin(), active.end(), [&](size_t a, size_t b) {
    const double ma = std::fabs(params[a]), mb = std::fabs(params[b]);
    if (ma != mb) return ma > mb;
    return a < b;
  });

  Mask out;
  out.bits.assign(params.size(), 0);
  for (size_t i = 0; i < params.size(); ++i)
    if (prior.bits[i] && !is_weight[i]) out.bits[i] = 1;  // biases keep prior bits
  for (size_t j = 0; j < keep; ++j) out.bits[active[j]] = 1;
  out.recount();
  return out;
}

Mask magnitude_prune(const std::vector<double>& params, double r_percent, const Mask& prior) {
  return magnitude_prune(params, r_percent, prior, std::vector<uint8_t>(params.size(), 1));
}

std::vector<double> apply_mask(const std::vector<double>& params, const Mask& mask) {
  if (params.size() != mask.size()) throw Error("apply_mask: length mismatch");
  std::vector<double> out(params.size());
  for (size_t i = 0; i < params.size(); ++i) out[i] = mask.bits[i] ? params[i] : 0.0;
  return out;
}

std::vector<double> lot_update(const std::vector<double>& params, const std::vector<double>& u,
                               const Mask& mask) {
  if (params.size() != u.size() || params.size() != mask.size())
    throw Error("lot_update: length mismatch");
  std::vector<double> out(params.size());
  for (size_t i = 0; i < params.size(); ++i) out[i] = mask.bits[i] ? params[i] - u[i] : 0.0;
  return out;
}

std::vector<double> rise_update(const std::vector<double>& params, const std::vector<double>& u,
                                const Mask& mask, const FrozenReference& frozen) {
  if (params.size() != u.size() || params.size() != mask.size() ||
      params.size() != frozen.values.size())
    throw Error("rise_update: length mismatch");
  std::vector<double> out(params.size());
  for (size_t i = 0; i < params.size(); ++i)
    out[i] = mask.bits[i] ? params[i] - u[i] : frozen.values[i];
  return out;
}

void save_mask(const std::filesystem::path& path, const Mask& mask, const MaskProvenance& prov) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open mask file for writing: " + path.string());
  const uint64_t n = mask.size();
  f.write(reinterpret_cast<const char*>(&n), 8);
  std::vector<uint8_t> packed((mask.size() + 7) / 8, 0);
  for (size_t i = 0; i < mask.size(); ++i)
    if (mask.bits[i]) packed[i / 8] |= static_cast<uint8_t>(1u << (i % 8));
  f.write(reinterpret_cast<const char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
  if (!f) throw Error("mask write failed: " + path.string());

  nlohmann::json side{{"n", n},
                      {"active_count", mask.active_count},
                      {"r_percent", prov.r_percent},
                      {"iteration", prov.iteration},
                      {"warmup_epochs", prov.warmup_epochs}};
  std::ofstream sf(path.string() + ".json");
  sf << side.dump(2) << "\n";
}

Mask load_mask(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open mask file: " + path.string());
  uint64_t n = 0;
  f.read(reinterpret_cast<char*>(&n), 8);
  std::vector<uint8_t> packed((n + 7) / 8);
  f.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
  if (!f) throw Error("truncated mask file: " + path.string());
  Mask m;
  m.bits.assign(n, 0);
  for (size_t i = 0; i < n; ++i) m.bits[i] = (packed[i / 8] >> (i % 8)) & 1u;
  m.recount();
  return m;
}

}  // namespace llab
