#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "posebias/error.hpp"

namespace posebias {

// Dense row-major float32 array (last dimension fastest). Spatial tensors use
// height x width x channels.
class Tensor {
 public:
  Tensor() = default;
  // Throws kInvalidArgument on empty/zero dims or a size mismatch, and
  // kNonFinite when any value is NaN or infinite.
  Tensor(std::vector<std::size_t> dims, std::vector<float> data);

  static Tensor zeros(std::vector<std::size_t> dims);

  const std::vector<std::size_t> &dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t dim(std::size_t i) const { return dims_.at(i); }
  std::size_t size() const { return data_.size(); }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  float operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }
  float &operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }

  bool operator==(const Tensor &) const = default;

 private:
  std::vector<std::size_t> dims_;
  std::vector<float> data_;
};

}  // namespace posebias
