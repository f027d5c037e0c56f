#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "llab/graph.hpp"
#include "llab/tensor.hpp"

namespace llab {

struct Dataset {
  Tensor<double> inputs;    // [n, ...sample]
  std::vector<int> labels;  // length n
  int n_classes = 0;

  size_t size() const { return labels.size(); }
  size_t sample_numel() const { return size() ? inputs.numel() / size() : 0; }

  // Gathers the given sample indices into a batch.
  Batch gather(const std::vector<size_t>& indices) const;

  // FNV-1a over input bytes and labels; used for result provenance.
  uint64_t content_hash() const;
};

enum class DatasetKind { SyntheticBlobs, SyntheticSpirals, IdxImages, CifarBinary };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::SyntheticBlobs;
  int n_classes = 10;
  int n_train = 5000;
  int n_test = 1000;
  uint64_t seed = 1;
  // synthetic-blobs
  int dim = 64;
  double cluster_std = 1.0;
  double center_scale = 1.0;
  // synthetic-spirals
  double spiral_noise = 0.1;
  // file-backed kinds
  std::string train_images, train_labels, test_images, test_labels;  // idx-images
  std::string train_file, test_file;                                 // cifar-binary
  // normalization: x -> (x - mean) / stddev after the 1/255 scaling
  double norm_mean = 0.0;
  double norm_std = 1.0;
  // flatten [C,H,W] images to a single feature axis (for MLP models)
  bool flatten_images = false;
};

struct DataPair {
  Dataset train;
  Dataset test;
};

DataPair load_dataset(const DatasetSpec& spec);

// Individual loaders/generators (load_dataset dispatches on kind).
DataPair make_blobs(const DatasetSpec& spec);
DataPair make_spirals(const DatasetSpec& spec);
// Standard IDX: magic 0x00000803 (images, big-endian dims n,r,c) and
// 0x00000801 (labels, dim n).
Tensor<double> read_idx_images(const std::filesystem::path& path);
std::vector<int> read_idx_labels(const std::filesystem::path& path);
// CIFAR binary: 3073-byte records, 1 label byte + 3x32x32 pixels.
Dataset read_cifar_binary(const std::filesystem::path& path, int n_classes);

}  // namespace llab
