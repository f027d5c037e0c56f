#include "llab/model.hpp"

#include <cmath>

namespace llab {

namespace {

LayerSpec simple_layer(LayerKind kind) {
  LayerSpec l;
  l.kind = kind;
  return l;
}

size_t numel(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) n *= static_cast<size_t>(d);
  return shape.empty() ? 0 : n;
}

void finalize(ModelSpec& m) {
  std::vector<int> cur = m.input_shape;
  for (auto& layer : m.layers) {
    layer.in_shape = cur;
    switch (layer.kind) {
      case LayerKind::Dense:
        if (static_cast<size_t>(layer.in_features) != numel(cur))
          throw Error("dense layer input size does not match incoming shape");
        cur = {layer.out_features};
        break;
      case LayerKind::Conv2d: {
        if (cur.size() != 3 || cur[0] != layer.in_channels)
          throw Error("conv layer expects [C,H,W] input with matching channels");
        const int h = cur[1] + 2 * layer.padding - layer.kernel + 1;
        const int w = cur[2] + 2 * layer.padding - layer.kernel + 1;
        if (h <= 0 || w <= 0) throw Error("conv output shape is empty");
        cur = {layer.out_channels, h, w};
        break;
      }
      case LayerKind::ReLU:
        break;
      case LayerKind::MaxPool2:
        if (cur.size() != 3) throw Error("max-pool expects [C,H,W] input");
        cur = {cur[0], cur[1] / 2, cur[2] / 2};
        if (cur[1] == 0 || cur[2] == 0) throw Error("max-pool output shape is empty");
        break;
      case LayerKind::Flatten:
        cur = {static_cast<int>(numel(cur))};
        break;
    }
    layer.out_shape = cur;
  }

  m.param_count = 0;
  m.layout.clear();
  for (int i = 0; i < static_cast<int>(m.layers.size()); ++i) {
    const auto& layer = m.layers[i];
    if (layer.weight_count() > 0) {
      m.layout.push_back({i, true, m.param_count, layer.weight_count()});
      m.param_count += layer.weight_count();
    }
    if (layer.bias_count() > 0) {
      m.layout.push_back({i, false, m.param_count, layer.bias_count()});
      m.param_count += layer.bias_count();
    }
  }
  if (m.loss == LossKind::DiagQuadratic) m.param_count = m.quad_coeffs.size();
  m.is_weight.assign(m.param_count, m.loss == LossKind::DiagQuadratic ? 1 : 0);
  for (const auto& slice : m.layout) {
    if (slice.is_weight)
      for (size_t j = 0; j < slice.count; ++j) m.is_weight[slice.offset + j] = 1;
  }
}

LayerSpec dense_layer(int in, int out, bool bias = true) {
  LayerSpec l;
  l.kind = LayerKind::Dense;
  l.in_features = in;
  l.out_features = out;
  l.has_bias = bias;
  return l;
}

LayerSpec conv_layer(int in_c, int out_c, int kernel = 3, int padding = 1) {
  LayerSpec l;
  l.kind = LayerKind::Conv2d;
  l.in_channels = in_c;
  l.out_channels = out_c;
  l.kernel = kernel;
  l.padding = padding;
  return l;
}

}  // namespace

ModelSpec make_mlp(const std::string& name, int input_dim, const std::vector<int>& hidden,
                   int n_classes) {
  if (input_dim <= 0 || n_classes <= 0) throw Error("mlp needs positive input dim and classes");
  ModelSpec m;
  m.name = name;
  m.input_shape = {input_dim};
  m.n_classes = n_classes;
  int cur = input_dim;
  for (int h : hidden) {
    m.layers.push_back(dense_layer(cur, h));
    m.layers.push_back(simple_layer(LayerKind::ReLU));
    cur = h;
  }
  m.layers.push_back(dense_layer(cur, n_classes));
  finalize(m);
  return m;
}

ModelSpec make_dense(int in_features, int out_features, int n_classes, bool has_bias) {
  ModelSpec m;
  m.name = "dense";
  m.input_shape = {in_features};
  m.n_classes = n_classes;
  m.layers.push_back(dense_layer(in_features, out_features, has_bias));
  finalize(m);
  return m;
}

ModelSpec make_quadratic(std::vector<double> coeffs) {
  ModelSpec m;
  m.name = "quadratic";
  m.input_shape = {1};
  m.n_classes = 1;
  m.loss = LossKind::DiagQuadratic;
  m.quad_coeffs = std::move(coeffs);
  finalize(m);
  return m;
}

ModelSpec build_model(const std::string& spec_name, const std::vector<int>& input_shape,
                      int n_classes) {
  if (input_shape.empty()) throw Error("empty input shape");
  if (spec_name == "mlp-small" || spec_name == "mlp-wide") {
    if (input_shape.size() != 1)
      throw Error(spec_name + " expects a 1-D input shape, got rank " +
                  std::to_string(input_shape.size()));
    const std::vector<int> hidden =
        spec_name == "mlp-small" ? std::vector<int>{300, 100} : std::vector<int>{800, 300};
    return make_mlp(spec_name, input_shape[0], hidden, n_classes);
  }
  if (spec_name == "conv-small") {
    if (input_shape.size() != 3) throw Error("conv-small expects a [C,H,W] input shape");
    ModelSpec m;
    m.name = spec_name;
    m.input_shape = input_shape;
    m.n_classes = n_classes;
    m.layers.push_back(conv_layer(input_shape[0], 8));
    m.layers.push_back(simple_layer(LayerKind::ReLU));
    m.layers.push_back(simple_layer(LayerKind::MaxPool2));
    m.layers.push_back(conv_layer(8, 16));
    m.layers.push_back(simple_layer(LayerKind::ReLU));
    m.layers.push_back(simple_layer(LayerKind::MaxPool2));
    m.layers.push_back(simple_layer(LayerKind::Flatten));
    const int flat = 16 * (input_shape[1] / 2 / 2) * (input_shape[2] / 2 / 2);
    m.layers.push_back(dense_layer(flat, 64));
    m.layers.push_back(simple_layer(LayerKind::ReLU));
    m.layers.push_back(dense_layer(64, n_classes));
    finalize(m);
    return m;
  }
  throw Error("unknown model spec: " + spec_name);
}

std::vector<double> init_params(const ModelSpec& model, uint64_t seed) {
  std::vector<double> params(model.param_count, 0.0);
  Rng rng(derive_seed(seed, /*tag=*/0x1417));
  for (const auto& slice : model.layout) {
    if (!slice.is_weight) continue;  // biases stay zero
    const auto& layer = model.layers[slice.layer];
    const int fan_in = layer.kind == LayerKind::Dense
                           ? layer.in_features
                           : layer.in_channels * layer.kernel * layer.kernel;
    // Kaiming uniform with ReLU gain: U(-b, b), b = sqrt(6 / fan_in).
    const double bound = std::sqrt(6.0 / fan_in);
    for (size_t j = 0; j < slice.count; ++j)
      params[slice.offset + j] = rng.uniform(-bound, bound);
  }
  return params;
}

std::vector<LayerParams> unflatten(const ModelSpec& model, const std::vector<double>& flat) {
  if (flat.size() != model.param_count) throw Error("unflatten: length mismatch");
  std::vector<LayerParams> out(model.layers.size());
  for (const auto& slice : model.layout) {
    const auto& layer = model.layers[slice.layer];
    std::vector<int> shape;
    if (layer.kind == LayerKind::Dense)
      shape = slice.is_weight ? std::vector<int>{layer.out_features, layer.in_features}
                              : std::vector<int>{layer.out_features};
    else
      shape = slice.is_weight
                  ? std::vector<int>{layer.out_channels, layer.in_channels, layer.kernel,
                                     layer.kernel}
                  : std::vector<int>{layer.out_channels};
    Tensor<double> t(shape);
    for (size_t j = 0; j < slice.count; ++j) t.data[j] = flat[slice.offset + j];
    (slice.is_weight ? out[slice.layer].weight : out[slice.layer].bias) = std::move(t);
  }
  return out;
}

std::vector<double> flatten(const ModelSpec& model, const std::vector<LayerParams>& layered) {
  if (layered.size() != model.layers.size()) throw Error("flatten: layer count mismatch");
  std::vector<double> flat(model.param_count, 0.0);
  for (const auto& slice : model.layout) {
    const auto& t = slice.is_weight ? layered[slice.layer].weight : layered[slice.layer].bias;
    if (t.numel() != slice.count) throw Error("flatten: tensor size mismatch");
    for (size_t j = 0; j < slice.count; ++j) flat[slice.offset + j] = t.data[j];
  }
  return flat;
}

ParamCoord locate(const ModelSpec& model, size_t flat_index) {
  if (flat_index >= model.param_count) throw Error("locate: index out of range");
  for (const auto& slice : model.layout) {
    if (flat_index >= slice.offset && flat_index < slice.offset + slice.count)
      return {slice.layer, slice.is_weight, flat_index - slice.offset};
  }
  throw Error("locate: index not covered by layout");
}

}  // namespace llab
