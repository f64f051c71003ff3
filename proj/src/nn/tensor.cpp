// SPDX-License-Identifier: Apache-2.0
#include "cwtrnn/nn/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "cwtrnn/core/error.hpp"

namespace cwtrnn::nn {

std::size_t shape_numel(std::span<const std::size_t> shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(std::span<const std::size_t> shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

void check_rank(const std::vector<std::size_t>& shape) {
  if (shape.empty() || shape.size() > 4) {
    throw ShapeError("tensor rank must be 1..4, got " + std::to_string(shape.size()));
  }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
  check_rank(shape_);
  data_.assign(shape_numel(shape_), 0.0f);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_rank(shape_);
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("shape " + nn::shape_string(shape_) + " needs " + std::to_string(shape_numel(shape_)) +
                     " values, got " + std::to_string(data_.size()));
  }
}

void Tensor::reshape(std::vector<std::size_t> shape) {
  check_rank(shape);
  if (shape_numel(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_string() + " to " + nn::shape_string(shape));
  }
  shape_ = std::move(shape);
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const { return nn::shape_string(shape_); }

}  // namespace cwtrnn::nn
