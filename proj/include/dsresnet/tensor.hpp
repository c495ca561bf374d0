// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace dsresnet {

/// Dense row-major array of doubles, W fastest. Single samples are rank 3
/// (C x H x W); vectors are rank 1; weight tensors use whatever rank their
/// layer needs.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor chw(std::size_t c, std::size_t h, std::size_t w, double fill = 0.0) {
    return Tensor({c, h, w}, fill);
  }
  static Tensor vector(std::size_t n, double fill = 0.0) { return Tensor({n}, fill); }
  static Tensor from_values(std::initializer_list<double> values);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  const double& operator[](std::size_t i) const noexcept { return data_[i]; }

  // Rank-3 accessors.
  double& at(std::size_t c, std::size_t h, std::size_t w) noexcept {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }
  const double& at(std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }

  /// Plane (H*W values) of channel c for a rank-3 tensor.
  std::span<double> channel(std::size_t c) noexcept;
  std::span<const double> channel(std::size_t c) const noexcept;

  void fill(double value) noexcept;
  Tensor reshaped(std::vector<std::size_t> shape) const;

  bool all_finite() const noexcept;
  std::string shape_string() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

/// Throws NumericError naming `what` if any value is NaN or Inf.
void require_finite(const Tensor& t, const char* what);

/// Throws DimensionError unless `t` has exactly `rank` dimensions.
void require_rank(const Tensor& t, std::size_t rank, const char* what);

}  // namespace dsresnet
