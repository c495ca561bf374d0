// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsresnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "dsresnet/errors.hpp"

namespace dsresnet {
namespace {

// Rank 0 denotes an empty tensor, not a scalar.
std::size_t element_count(const std::vector<std::size_t>& shape) {
  if (shape.empty()) return 0;
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (element_count(shape_) != data_.size()) {
    throw DimensionError("tensor shape " + dsresnet::shape_string(shape_) +
                         " does not match data length " +
                         std::to_string(data_.size()));
  }
}

Tensor Tensor::from_values(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_string());
  }
  return shape_[axis];
}

std::span<double> Tensor::channel(std::size_t c) noexcept {
  const std::size_t plane = shape_[1] * shape_[2];
  return std::span<double>(data_).subspan(c * plane, plane);
}

std::span<const double> Tensor::channel(std::size_t c) const noexcept {
  const std::size_t plane = shape_[1] * shape_[2];
  return std::span<const double>(data_).subspan(c * plane, plane);
}

void Tensor::fill(double value) noexcept { std::fill(data_.begin(), data_.end(), value); }

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const { return dsresnet::shape_string(shape_); }

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

void require_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) {
    throw NumericError(std::string(what) + ": non-finite value in input");
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(what) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + t.shape_string());
  }
}

}  // namespace dsresnet
