#include "llab/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>

namespace llab {

namespace {
constexpr std::array<char, 4> kMagic{'L', 'L', 'A', 'B'};
constexpr uint16_t kVersion = 1;
}  // namespace

CheckpointStore::CheckpointStore(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
}

std::filesystem::path CheckpointStore::file(int epoch) const {
  char name[32];
  std::snprintf(name, sizeof(name), "ckpt_e%05d.llab", epoch);
  return root_ / name;
}

bool CheckpointStore::has(int epoch) const { return std::filesystem::exists(file(epoch)); }

int CheckpointStore::latest(int limit) const {
  for (int e = limit; e >= 0; --e)
    if (has(e)) return e;
  return -1;
}

void CheckpointStore::save(int epoch, const std::vector<double>& params,
                           const std::vector<double>& momentum, uint64_t seed) const {
  if (!momentum.empty() && momentum.size() != params.size())
    throw Error("checkpoint: momentum length mismatch");
  std::ofstream f(file(epoch), std::ios::binary);
  if (!f) throw Error("cannot write checkpoint " + file(epoch).string());
  f.write(kMagic.data(), 4);
  f.write(reinterpret_cast<const char*>(&kVersion), 2);
  const uint64_t n = params.size();
  const uint32_t e = static_cast<uint32_t>(epoch);
  f.write(reinterpret_cast<const char*>(&n), 8);
  f.write(reinterpret_cast<const char*>(&e), 4);
  f.write(reinterpret_cast<const char*>(&seed), 8);
  f.write(reinterpret_cast<const char*>(params.data()), static_cast<std::streamsize>(8 * n));
  const uint8_t has_momentum = momentum.empty() ? 0 : 1;
  f.write(reinterpret_cast<const char*>(&has_momentum), 1);
  if (has_momentum)
    f.write(reinterpret_cast<const char*>(momentum.data()), static_cast<std::streamsize>(8 * n));
  if (!f) throw Error("checkpoint write failed: " + file(epoch).string());
}

CheckpointStore::Snapshot CheckpointStore::load(int epoch) const {
  std::ifstream f(file(epoch), std::ios::binary);
  if (!f) throw Error("missing checkpoint " + file(epoch).string());
  std::array<char, 4> magic{};
  uint16_t version = 0;
  uint64_t n = 0;
  uint32_t e = 0;
  Snapshot snap;
  f.read(magic.data(), 4);
  f.read(reinterpret_cast<char*>(&version), 2);
  f.read(reinterpret_cast<char*>(&n), 8);
  f.read(reinterpret_cast<char*>(&e), 4);
  f.read(reinterpret_cast<char*>(&snap.seed), 8);
  if (!f || magic != kMagic) throw Error("bad checkpoint header: " + file(epoch).string());
  if (version != kVersion) throw Error("unsupported checkpoint version");
  snap.epoch = static_cast<int>(e);
  snap.params.resize(n);
  f.read(reinterpret_cast<char*>(snap.params.data()), static_cast<std::streamsize>(8 * n));
  uint8_t has_momentum = 0;
  f.read(reinterpret_cast<char*>(&has_momentum), 1);
  if (has_momentum) {
    snap.momentum.resize(n);
    f.read(reinterpret_cast<char*>(snap.momentum.data()), static_cast<std::streamsize>(8 * n));
  }
  if (!f) throw Error("truncated checkpoint: " + file(epoch).string());
  return snap;
}

}  // namespace llab
