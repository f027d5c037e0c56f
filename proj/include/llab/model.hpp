#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "llab/common.hpp"
#include "llab/tensor.hpp"

namespace llab {

enum class LayerKind { Dense, Conv2d, ReLU, MaxPool2, Flatten };

struct LayerSpec {
  LayerKind kind{};
  // Dense
  int in_features = 0;
  int out_features = 0;
  bool has_bias = true;
  // Conv2d (3x3, stride 1 unless stated otherwise)
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int padding = 1;
  // Per-sample shapes, resolved at build time.
  std::vector<int> in_shape;
  std::vector<int> out_shape;

  size_t weight_count() const {
    switch (kind) {
      case LayerKind::Dense:
        return static_cast<size_t>(in_features) * out_features;
      case LayerKind::Conv2d:
        return static_cast<size_t>(in_channels) * out_channels * kernel * kernel;
      default:
        return 0;
    }
  }
  size_t bias_count() const {
    if (kind == LayerKind::Dense) return has_bias ? static_cast<size_t>(out_features) : 0;
    if (kind == LayerKind::Conv2d) return has_bias ? static_cast<size_t>(out_channels) : 0;
    return 0;
  }
  size_t param_count() const { return weight_count() + bias_count(); }
};

enum class LossKind { SoftmaxCrossEntropy, DiagQuadratic };

// One contiguous slice of the flat parameter vector: a layer's weight or
// bias tensor. Layers in definition order, weights before biases,
// row-major within tensors.
struct ParamSlice {
  int layer;
  bool is_weight;
  size_t offset;
  size_t count;
};

struct ModelSpec {
  std::string name;
  std::vector<LayerSpec> layers;
  std::vector<int> input_shape;  // per-sample
  int n_classes = 0;
  LossKind loss = LossKind::SoftmaxCrossEntropy;
  std::vector<double> quad_coeffs;  // DiagQuadratic only: loss = 1/2 sum a_i w_i^2
  size_t param_count = 0;
  std::vector<ParamSlice> layout;
  std::vector<uint8_t> is_weight;  // per flat index; biases are never pruned
};

// spec_name in {mlp-small, mlp-wide, conv-small}.
ModelSpec build_model(const std::string& spec_name, const std::vector<int>& input_shape,
                      int n_classes);

// Building blocks, used by build_model and by tests.
ModelSpec make_mlp(const std::string& name, int input_dim, const std::vector<int>& hidden,
                   int n_classes);
ModelSpec make_dense(int in_features, int out_features, int n_classes, bool has_bias = true);
ModelSpec make_quadratic(std::vector<double> coeffs);

// Kaiming-uniform weights, zero biases; fully determined by the seed.
std::vector<double> init_params(const ModelSpec& model, uint64_t seed);

struct LayerParams {
  Tensor<double> weight;
  Tensor<double> bias;
};

std::vector<LayerParams> unflatten(const ModelSpec& model, const std::vector<double>& flat);
std::vector<double> flatten(const ModelSpec& model, const std::vector<LayerParams>& layered);

// Maps a flat index to its (layer, weight-or-bias, local offset) coordinates.
struct ParamCoord {
  int layer;
  bool is_weight;
  size_t local_offset;
};
ParamCoord locate(const ModelSpec& model, size_t flat_index);

}  // namespace llab
