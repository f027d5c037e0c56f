#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "llab/common.hpp"

namespace llab {

// Per-epoch parameter snapshots, one file per epoch under a root
// directory. Binary layout: magic "LLAB", u16 version, u64 N, u32 epoch,
// u64 seed, N little-endian f64 params, u8 has-momentum flag, then the
// momentum section (N f64).
class CheckpointStore {
 public:
  explicit CheckpointStore(std::filesystem::path root);

  struct Snapshot {
    std::vector<double> params;
    std::vector<double> momentum;
    uint64_t seed = 0;
    int epoch = 0;
  };

  bool has(int epoch) const;
  void save(int epoch, const std::vector<double>& params, const std::vector<double>& momentum,
            uint64_t seed) const;
  Snapshot load(int epoch) const;

  // Largest recorded epoch <= limit, or -1 if none.
  int latest(int limit) const;

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path file(int epoch) const;
  std::filesystem::path root_;
};

}  // namespace llab
