#include "llab/dataset.hpp"

#include <cmath>
#include <fstream>

namespace llab {

Batch Dataset::gather(const std::vector<size_t>& indices) const {
  const size_t sn = sample_numel();
  std::vector<int> shape = inputs.shape;
  shape[0] = static_cast<int>(indices.size());
  Batch b;
  b.inputs = Tensor<double>(shape);
  b.labels.resize(indices.size());
  for (size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= size()) throw Error("batch index out of range");
    const double* src = inputs.data.data() + indices[i] * sn;
    std::copy(src, src + sn, b.inputs.data.data() + i * sn);
    b.labels[i] = labels[indices[i]];
  }
  return b;
}

uint64_t Dataset::content_hash() const {
  uint64_t h = fnv1a(inputs.data.data(), inputs.data.size() * sizeof(double));
  h = fnv1a(labels.data(), labels.size() * sizeof(int), h);
  return h;
}

namespace {

Dataset sample_blobs(const std::vector<std::vector<double>>& centers, const DatasetSpec& spec,
                     int n, uint64_t seed) {
  Dataset d;
  d.n_classes = spec.n_classes;
  d.inputs = Tensor<double>({n, spec.dim});
  d.labels.resize(n);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const int cls = i % spec.n_classes;  // balanced classes
    d.labels[i] = cls;
    double* x = d.inputs.data.data() + static_cast<size_t>(i) * spec.dim;
    for (int j = 0; j < spec.dim; ++j) x[j] = centers[cls][j] + spec.cluster_std * rng.gaussian();
  }
  return d;
}

Dataset sample_spirals(const DatasetSpec& spec, int n, uint64_t seed) {
  Dataset d;
  d.n_classes = spec.n_classes;
  d.inputs = Tensor<double>({n, 2});
  d.labels.resize(n);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const int cls = i % spec.n_classes;
    d.labels[i] = cls;
    const double t = rng.uniform();  // position along the arm
    const double r = 0.2 + 2.0 * t;
    const double phi = 3.0 * M_PI * t + 2.0 * M_PI * cls / spec.n_classes;
    d.inputs.data[2 * i] = r * std::cos(phi) + spec.spiral_noise * rng.gaussian();
    d.inputs.data[2 * i + 1] = r * std::sin(phi) + spec.spiral_noise * rng.gaussian();
  }
  return d;
}

uint32_t read_u32_be(std::istream& f, const std::string& what) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  if (!f) throw Error("truncated file while reading " + what);
  return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) | uint32_t(b[3]);
}

void normalize(Dataset& d, const DatasetSpec& spec) {
  for (auto& x : d.inputs.data) x = (x - spec.norm_mean) / spec.norm_std;
}

void maybe_flatten(Dataset& d, const DatasetSpec& spec) {
  if (!spec.flatten_images) return;
  d.inputs.shape = {d.inputs.shape[0], static_cast<int>(d.sample_numel())};
}

}  // namespace

DataPair make_blobs(const DatasetSpec& spec) {
  if (spec.dim <= 0 || spec.n_classes <= 0) throw Error("blobs: bad dim/classes");
  std::vector<std::vector<double>> centers(spec.n_classes, std::vector<double>(spec.dim));
  Rng crng(derive_seed(spec.seed, 0xB10B0001));
  for (auto& c : centers)
    for (auto& v : c) v = spec.center_scale * crng.gaussian();
  DataPair p;
  p.train = sample_blobs(centers, spec, spec.n_train, derive_seed(spec.seed, 0xB10B0002));
  p.test = sample_blobs(centers, spec, spec.n_test, derive_seed(spec.seed, 0xB10B0003));
  return p;
}

DataPair make_spirals(const DatasetSpec& spec) {
  DataPair p;
  p.train = sample_spirals(spec, spec.n_train, derive_seed(spec.seed, 0x542A0001));
  p.test = sample_spirals(spec, spec.n_test, derive_seed(spec.seed, 0x542A0002));
  return p;
}

Tensor<double> read_idx_images(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open idx file: " + path.string());
  const uint32_t magic = read_u32_be(f, "idx magic");
  if (magic != 0x00000803u)
    throw Error("bad idx image magic in " + path.string());
  const int n = static_cast<int>(read_u32_be(f, "idx count"));
  const int rows = static_cast<int>(read_u32_be(f, "idx rows"));
  const int cols = static_cast<int>(read_u32_be(f, "idx cols"));
  std::vector<unsigned char> raw(static_cast<size_t>(n) * rows * cols);
  f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!f) throw Error("truncated idx image file: " + path.string());
  Tensor<double> t({n, 1, rows, cols});
  for (size_t i = 0; i < raw.size(); ++i) t.data[i] = raw[i] / 255.0;
  return t;
}

std::vector<int> read_idx_labels(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open idx file: " + path.string());
  const uint32_t magic = read_u32_be(f, "idx magic");
  if (magic != 0x00000801u)
    throw Error("bad idx label magic in " + path.string());
  const int n = static_cast<int>(read_u32_be(f, "idx count"));
  std::vector<unsigned char> raw(static_cast<size_t>(n));
  f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!f) throw Error("truncated idx label file: " + path.string());
  return std::vector<int>(raw.begin(), raw.end());
}

Dataset read_cifar_binary(const std::filesystem::path& path, int n_classes) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw Error("cannot open cifar file: " + path.string());
  const auto bytes = static_cast<uint64_t>(f.tellg());
  constexpr uint64_t kRecord = 3073;  // 1 label + 3*32*32 pixels
  if (bytes % kRecord != 0)
    throw Error("cifar file size is not a multiple of 3073: " + path.string());
  const int n = static_cast<int>(bytes / kRecord);
  f.seekg(0);
  Dataset d;
  d.n_classes = n_classes;
  d.inputs = Tensor<double>({n, 3, 32, 32});
  d.labels.resize(n);
  std::vector<unsigned char> rec(kRecord);
  for (int i = 0; i < n; ++i) {
    f.read(reinterpret_cast<char*>(rec.data()), kRecord);
    if (!f) throw Error("truncated cifar file: " + path.string());
    if (rec[0] >= n_classes) throw Error("cifar label out of range in " + path.string());
    d.labels[i] = rec[0];
    for (size_t j = 0; j < kRecord - 1; ++j)
      d.inputs.data[static_cast<size_t>(i) * 3072 + j] = rec[1 + j] / 255.0;
  }
  return d;
}

DataPair load_dataset(const DatasetSpec& spec) {
  DataPair p;
  switch (spec.kind) {
    case DatasetKind::SyntheticBlobs:
      p = make_blobs(spec);
      break;
    case DatasetKind::SyntheticSpirals:
      p = make_spirals(spec);
      break;
    case DatasetKind::IdxImages: {
      p.train.inputs = read_idx_images(spec.train_images);
      p.train.labels = read_idx_labels(spec.train_labels);
      p.test.inputs = read_idx_images(spec.test_images);
      p.test.labels = read_idx_labels(spec.test_labels);
      p.train.n_classes = p.test.n_classes = spec.n_classes;
      for (const auto* d : {&p.train, &p.test}) {
        if (static_cast<size_t>(d->inputs.shape[0]) != d->labels.size())
          throw Error("idx image/label count mismatch");
        for (int lbl : d->labels)
          if (lbl < 0 || lbl >= spec.n_classes) throw Error("idx label out of range");
      }
      normalize(p.train, spec);
      normalize(p.test, spec);
      maybe_flatten(p.train, spec);
      maybe_flatten(p.test, spec);
      break;
    }
    case DatasetKind::CifarBinary:
      p.train = read_cifar_binary(spec.train_file, spec.n_classes);
      p.test = read_cifar_binary(spec.test_file, spec.n_classes);
      normalize(p.train, spec);
      normalize(p.test, spec);
      maybe_flatten(p.train, spec);
      maybe_flatten(p.test, spec);
      break;
  }
  return p;
}

}  // namespace llab
