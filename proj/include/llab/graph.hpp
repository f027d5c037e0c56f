#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "llab/dual.hpp"
#include "llab/model.hpp"
#include "llab/tensor.hpp"

namespace llab {

struct Batch {
  Tensor<double> inputs;    // [B, ...sample]
  std::vector<int> labels;  // length B
  size_t size() const { return labels.size(); }
};

// Taped state of one forward pass. Templated on the scalar so the same
// code runs in double, float, and Dual<double> (exact HVPs).
template <typename T>
struct ComputeGraph {
  const ModelSpec* model = nullptr;
  std::vector<T> params;
  std::vector<Tensor<T>> acts;  // acts[i] = input of layer i; acts.back() = logits
  std::vector<std::vector<int64_t>> pool_argmax;  // per layer, per output element
  Tensor<T> probs;                                // softmax probabilities [B, C]
  std::vector<int> labels;
  T loss{};
  bool consumed = false;
};

namespace detail {

template <typename T>
void dense_forward(const LayerSpec& l, const T* w, const T* b, const Tensor<T>& in,
                   Tensor<T>& out) {
  const int batch = in.shape[0];
  const int m = l.in_features, n = l.out_features;
  for (int s = 0; s < batch; ++s) {
    const T* x = in.data.data() + static_cast<size_t>(s) * m;
    T* y = out.data.data() + static_cast<size_t>(s) * n;
    for (int j = 0; j < n; ++j) {
      T acc = l.has_bias ? b[j] : T(0);
      const T* wr = w + static_cast<size_t>(j) * m;
      for (int i = 0; i < m; ++i) acc += wr[i] * x[i];
      y[j] = acc;
    }
  }
}

template <typename T>
void dense_backward(const LayerSpec& l, const T* w, const Tensor<T>& in, const Tensor<T>& dout,
                    Tensor<T>& din, T* dw, T* db) {
  const int batch = in.shape[0];
  const int m = l.in_features, n = l.out_features;
  for (int s = 0; s < batch; ++s) {
    const T* x = in.data.data() + static_cast<size_t>(s) * m;
    const T* dy = dout.data.data() + static_cast<size_t>(s) * n;
    T* dx = din.data.data() + static_cast<size_t>(s) * m;
    for (int j = 0; j < n; ++j) {
      const T g = dy[j];
      const T* wr = w + static_cast<size_t>(j) * m;
      T* dwr = dw + static_cast<size_t>(j) * m;
      for (int i = 0; i < m; ++i) {
        dwr[i] += g * x[i];
        dx[i] += g * wr[i];
      }
      if (l.has_bias) db[j] += g;
    }
  }
}

template <typename T>
void conv_forward(const LayerSpec& l, const T* w, const T* b, const Tensor<T>& in,
                  Tensor<T>& out) {
  const int batch = in.shape[0];
  const int ci = l.in_channels, co = l.out_channels, k = l.kernel, pad = l.padding;
  const int hi = l.in_shape[1], wi = l.in_shape[2];
  const int ho = l.out_shape[1], wo = l.out_shape[2];
  for (int s = 0; s < batch; ++s) {
    const T* xs = in.data.data() + static_cast<size_t>(s) * ci * hi * wi;
    T* ys = out.data.data() + static_cast<size_t>(s) * co * ho * wo;
    for (int oc = 0; oc < co; ++oc) {
      for (int y = 0; y < ho; ++y) {
        for (int x = 0; x < wo; ++x) {
          T acc = l.has_bias ? b[oc] : T(0);
          for (int ic = 0; ic < ci; ++ic) {
            const T* xc = xs + static_cast<size_t>(ic) * hi * wi;
            const T* wk = w + ((static_cast<size_t>(oc) * ci + ic) * k) * k;
            for (int ky = 0; ky < k; ++ky) {
              const int iy = y + ky - pad;
              if (iy < 0 || iy >= hi) continue;
              for (int kx = 0; kx < k; ++kx) {
                const int ix = x + kx - pad;
                if (ix < 0 || ix >= wi) continue;
                acc += wk[ky * k + kx] * xc[iy * wi + ix];
              }
            }
          }
          ys[(static_cast<size_t>(oc) * ho + y) * wo + x] = acc;
        }
      }
    }
  }
}

template <typename T>
void conv_backward(const LayerSpec& l, const T* w, const Tensor<T>& in, const Tensor<T>& dout,
                   Tensor<T>& din, T* dw, T* db) {
  const int batch = in.shape[0];
  const int ci = l.in_channels, co = l.out_channels, k = l.kernel, pad = l.padding;
  const int hi = l.in_shape[1], wi = l.in_shape[2];
  const int ho = l.out_shape[1], wo = l.out_shape[2];
  for (int s = 0; s < batch; ++s) {
    const T* xs = in.data.data() + static_cast<size_t>(s) * ci * hi * wi;
    const T* dys = dout.data.data() + static_cast<size_t>(s) * co * ho * wo;
    T* dxs = din.data.data() + static_cast<size_t>(s) * ci * hi * wi;
    for (int oc = 0; oc < co; ++oc) {
      for (int y = 0; y < ho; ++y) {
        for (int x = 0; x < wo; ++x) {
          const T g = dys[(static_cast<size_t>(oc) * ho + y) * wo + x];
          if (l.has_bias) db[oc] += g;
          for (int ic = 0; ic < ci; ++ic) {
            const T* xc = xs + static_cast<size_t>(ic) * hi * wi;
            T* dxc = dxs + static_cast<size_t>(ic) * hi * wi;
            const T* wk = w + ((static_cast<size_t>(oc) * ci + ic) * k) * k;
            T* dwk = dw + ((static_cast<size_t>(oc) * ci + ic) * k) * k;
            for (int ky = 0; ky < k; ++ky) {
              const int iy = y + ky - pad;
              if (iy < 0 || iy >= hi) continue;
              for (int kx = 0; kx < k; ++kx) {
                const int ix = x + kx - pad;
                if (ix < 0 || ix >= wi) continue;
                dwk[ky * k + kx] += g * xc[iy * wi + ix];
                dxc[iy * wi + ix] += g * wk[ky * k + kx];
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace detail

// Mean cross-entropy forward pass; the returned graph holds everything
// backward needs. Throws on shape mismatch, empty batch, or a non-finite
// loss.
template <typename T>
ComputeGraph<T> forward_t(const ModelSpec& model, std::vector<T> params, const Batch& batch) {
  if (batch.size() == 0) throw Error("empty batch");
  if (params.size() != model.param_count) throw Error("params length does not match model");

  ComputeGraph<T> g;
  g.model = &model;
  g.labels = batch.labels;
  g.params = std::move(params);

  if (model.loss == LossKind::DiagQuadratic) {
    T loss(0);
    for (size_t i = 0; i < model.quad_coeffs.size(); ++i)
      loss += T(0.5 * model.quad_coeffs[i]) * g.params[i] * g.params[i];
    if (!is_finite(loss)) throw Error("non-finite loss");
    g.loss = loss;
    return g;
  }

  const int B = static_cast<int>(batch.size());
  if (batch.inputs.shape.empty() || batch.inputs.shape[0] != B)
    throw Error("batch inputs/labels size mismatch");
  const size_t sample_numel = batch.inputs.numel() / B;
  if (sample_numel != Tensor<double>::numel_of(model.input_shape))
    throw Error("batch sample shape does not match model input");
  for (int lbl : batch.labels)
    if (lbl < 0 || lbl >= model.n_classes) throw Error("label out of range");

  // acts[0]: input cast to T, shaped [B, model.input_shape...].
  std::vector<int> in_shape{B};
  in_shape.insert(in_shape.end(), model.input_shape.begin(), model.input_shape.end());
  Tensor<T> cur(in_shape);
  for (size_t i = 0; i < batch.inputs.numel(); ++i) cur.data[i] = T(batch.inputs.data[i]);
  g.acts.push_back(std::move(cur));
  g.pool_argmax.resize(model.layers.size());

  for (size_t li = 0; li < model.layers.size(); ++li) {
    const auto& layer = model.layers[li];
    const Tensor<T>& in = g.acts.back();
    std::vector<int> out_shape{B};
    out_shape.insert(out_shape.end(), layer.out_shape.begin(), layer.out_shape.end());
    Tensor<T> out(out_shape);

    const T* w = nullptr;
    const T* b = nullptr;
    for (const auto& slice : model.layout) {
      if (slice.layer != static_cast<int>(li)) continue;
      (slice.is_weight ? w : b) = g.params.data() + slice.offset;
    }

    switch (layer.kind) {
      case LayerKind::Dense:
        detail::dense_forward(layer, w, b, in, out);
        break;
      case LayerKind::Conv2d:
        detail::conv_forward(layer, w, b, in, out);
        break;
      case LayerKind::ReLU:
        for (size_t i = 0; i < in.numel(); ++i) out.data[i] = in.data[i] > T(0) ? in.data[i] : T(0);
        break;
      case LayerKind::MaxPool2: {
        const int c = layer.in_shape[0], hi = layer.in_shape[1], wi = layer.in_shape[2];
        const int ho = layer.out_shape[1], wo = layer.out_shape[2];
        g.pool_argmax[li].assign(out.numel(), 0);
        for (int s = 0; s < B; ++s) {
          for (int ch = 0; ch < c; ++ch) {
            const size_t in_base = (static_cast<size_t>(s) * c + ch) * hi * wi;
            const size_t out_base = (static_cast<size_t>(s) * c + ch) * ho * wo;
            for (int y = 0; y < ho; ++y) {
              for (int x = 0; x < wo; ++x) {
                int64_t best = static_cast<int64_t>(in_base) + (2 * y) * wi + 2 * x;
                T best_v = in.data[best];
                for (int dy = 0; dy < 2; ++dy) {
                  for (int dx = 0; dx < 2; ++dx) {
                    const int64_t idx =
                        static_cast<int64_t>(in_base) + (2 * y + dy) * wi + (2 * x + dx);
                    if (in.data[idx] > best_v) {
                      best_v = in.data[idx];
                      best = idx;
                    }
                  }
                }
                out.data[out_base + static_cast<size_t>(y) * wo + x] = best_v;
                g.pool_argmax[li][out_base + static_cast<size_t>(y) * wo + x] = best;
              }
            }
          }
        }
        break;
      }
      case LayerKind::Flatten:
        out.data = in.data;
        break;
    }
    g.acts.push_back(std::move(out));
  }

  // Softmax cross-entropy, mean over the batch, fixed left-to-right order.
  const Tensor<T>& logits = g.acts.back();
  const int C = model.n_classes;
  if (logits.numel() != static_cast<size_t>(B) * C)
    throw Error("model output size does not match class count");
  g.probs = Tensor<T>(std::vector<int>{B, C});
  T loss(0);
  for (int s = 0; s < B; ++s) {
    const T* z = logits.data.data() + static_cast<size_t>(s) * C;
    T m = z[0];
    for (int c = 1; c < C; ++c)
      if (z[c] > m) m = z[c];
    T sum(0);
    for (int c = 0; c < C; ++c) sum += exp(z[c] - m);
    const T lse = m + log(sum);
    for (int c = 0; c < C; ++c) g.probs.data[static_cast<size_t>(s) * C + c] = exp(z[c] - lse);
    loss += lse - z[batch.labels[s]];
  }
  loss = loss / T(static_cast<double>(B));
  if (!is_finite(loss)) throw Error("non-finite loss");
  g.loss = loss;
  return g;
}

inline ComputeGraph<double> forward(const ModelSpec& model, const std::vector<double>& params,
                                    const Batch& batch) {
  return forward_t<double>(model, params, batch);
}

// Reverse pass over a taped graph. A graph can be consumed once.
template <typename T>
std::vector<T> backward(ComputeGraph<T>& g) {
  if (g.consumed) throw Error("double backward on the same graph");
  g.consumed = true;
  const ModelSpec& model = *g.model;
  std::vector<T> grad(model.param_count, T(0));

  if (model.loss == LossKind::DiagQuadratic) {
    for (size_t i = 0; i < model.quad_coeffs.size(); ++i)
      grad[i] = T(model.quad_coeffs[i]) * g.params[i];
    return grad;
  }

  const int B = static_cast<int>(g.labels.size());
  const int C = model.n_classes;
  Tensor<T> dcur(g.acts.back().shape);
  const T inv_b = T(1.0 / static_cast<double>(B));
  for (int s = 0; s < B; ++s)
    for (int c = 0; c < C; ++c)
      dcur.data[static_cast<size_t>(s) * C + c] =
          (g.probs.data[static_cast<size_t>(s) * C + c] - T(c == g.labels[s] ? 1.0 : 0.0)) * inv_b;

  for (int li = static_cast<int>(model.layers.size()) - 1; li >= 0; --li) {
    const auto& layer = model.layers[li];
    const Tensor<T>& in = g.acts[li];
    Tensor<T> din(in.shape);

    const T* w = nullptr;
    T* dw = nullptr;
    T* db = nullptr;
    for (const auto& slice : model.layout) {
      if (slice.layer != li) continue;
      if (slice.is_weight) {
        w = g.params.data() + slice.offset;
        dw = grad.data() + slice.offset;
      } else {
        db = grad.data() + slice.offset;
      }
    }

    switch (layer.kind) {
      case LayerKind::Dense:
        detail::dense_backward(layer, w, in, dcur, din, dw, db);
        break;
      case LayerKind::Conv2d:
        detail::conv_backward(layer, w, in, dcur, din, dw, db);
        break;
      case LayerKind::ReLU:
        for (size_t i = 0; i < in.numel(); ++i)
          din.data[i] = in.data[i] > T(0) ? dcur.data[i] : T(0);
        break;
      case LayerKind::MaxPool2:
        for (size_t i = 0; i < dcur.numel(); ++i)
          din.data[g.pool_argmax[li][i]] += dcur.data[i];
        break;
      case LayerKind::Flatten:
        din.data = dcur.data;
        break;
    }
    dcur = std::move(din);
  }
  return grad;
}

inline std::vector<double> gradient(const ModelSpec& model, const std::vector<double>& params,
                                    const Batch& batch) {
  auto g = forward(model, params, batch);
  return backward(g);
}

// Exact Hessian-vector product: gradient tangent along v, computed by
// running the whole forward+backward pass in dual arithmetic.
inline std::vector<double> hvp(const ModelSpec& model, const std::vector<double>& params,
                               const Batch& batch, const std::vector<double>& v) {
  if (v.size() != params.size()) throw Error("hvp: direction length mismatch");
  std::vector<Dual<double>> dual_params(params.size());
  for (size_t i = 0; i < params.size(); ++i) dual_params[i] = {params[i], v[i]};
  auto g = forward_t<Dual<double>>(model, std::move(dual_params), batch);
  auto grad = backward(g);
  std::vector<double> out(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    if (!std::isfinite(grad[i].d)) throw Error("non-finite hvp result");
    out[i] = grad[i].d;
  }
  return out;
}

}  // namespace llab
