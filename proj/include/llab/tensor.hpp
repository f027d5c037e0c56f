#pragma once

#include <cstddef>
#include <numeric>
#include <vector>

#include "llab/common.hpp"

namespace llab {

template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), T(0)) {}
  Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (numel_of(shape) != data.size()) throw Error("tensor shape/data size mismatch");
  }

  static size_t numel_of(const std::vector<int>& s) {
    size_t n = 1;
    for (int d : s) {
      if (d < 0) throw Error("negative tensor dimension");
      n *= static_cast<size_t>(d);
    }
    return s.empty() ? 0 : n;
  }

  size_t numel() const { return data.size(); }
  T& operator[](size_t i) { return data[i]; }
  const T& operator[](size_t i) const { return data[i]; }
};

}  // namespace llab
