// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0
//
// Architecture descriptions for the DS-ResNet family, network
// construction, and forward inference.
//
// A network is described twice. ArchitectureSpec is the declarative form
// (one LayerConfig per table row: conv, SE, pooling, residual group, ...).
// ModelParams is the expanded form: a flat list of primitive layers
// (depthwise conv, pointwise conv, ReLU, residual begin/end, ...) each
// carrying its weight tensor. The expanded form is what gets executed,
// differentiated, and serialized.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dsresnet/nn_ops.hpp"
#include "dsresnet/se_block.hpp"
#include "dsresnet/tensor.hpp"

namespace dsresnet {

enum class LayerKind {
  kStandardConv,
  kSE,
  kAvgPool,
  kResidualGroup,
  kDSConv,
  kGlobalAvgPool,
  kSoftmaxFC,
};

const char* to_string(LayerKind kind) noexcept;

/// Where extra SE blocks go inside depthwise-separable layers. Only kNone
/// is used by the three main presets.
enum class SEPlacement { kNone, kAfterDepthwise, kAfterPointwise };

/// One row of an architecture table. Dilation 0 means "use the schedule"
/// (2^floor(i/3) for the i-th depthwise-separable layer).
struct LayerConfig {
  LayerKind kind = LayerKind::kStandardConv;
  int m = 0;  // kernel / pooling window height (time)
  int r = 0;  // kernel / pooling window width (frequency)
  int n = 0;  // output channels (classes for kSoftmaxFC)
  int d_w = 1;
  int d_h = 1;
  int repeat = 1;            // residual blocks, or plain DS layers
  int layers_per_block = 2;  // residual groups only
};

struct ArchitectureSpec {
  std::string name;
  std::vector<LayerConfig> layers;
  std::size_t input_channels = 1;
  std::size_t input_height = 101;  // frames
  std::size_t input_width = 40;    // MFCC coefficients
  std::size_t num_classes = 12;
  double se_reduction = 1.0 / 16.0;
  SEPlacement ds_se = SEPlacement::kNone;

  /// Throws ConfigError/DimensionError if the layer stack cannot be built:
  /// it must end with global pooling then the softmax layer, residual
  /// groups must preserve channels, pooling must fit.
  void validate() const;
};

/// 2^floor(i/3) for the 0-based depthwise-separable layer index i.
int dilation_schedule(int ds_index);

/// Names accepted by preset(): DS-ResNet18, DS-ResNet14, DS-ResNet10 and
/// the SE-placement variants DS-ResNet18-n / -d / -p.
std::vector<std::string> preset_names();
ArchitectureSpec preset(const std::string& name);

/// Number of depthwise-separable layers in the stack.
int ds_layer_count(const ArchitectureSpec& spec);

struct ReceptiveField {
  std::size_t time = 1;
  std::size_t freq = 1;
};

/// Receptive field of one output unit of the last convolution, measured in
/// input pixels: 1 + sum (k-1) * d * jump over all kernels and pooling
/// windows, where jump is the product of preceding pooling strides.
ReceptiveField receptive_field(const ArchitectureSpec& spec);

/// Primitive layers of the expanded network. Values are the tags of the
/// model file format and must not change.
enum class OpKind : std::uint32_t {
  kStandardConv = 1,
  kDepthwiseConv = 2,
  kPointwiseConv = 3,
  kSEReduce = 4,
  kSEExpand = 5,
  kAvgPool = 6,
  kResidualBegin = 7,
  kResidualEnd = 8,
  kRelu = 9,
  kGlobalAvgPool = 10,
  kSoftmaxFC = 11,
};

const char* to_string(OpKind kind) noexcept;
bool is_known_op(std::uint32_t tag) noexcept;

struct ModelLayer {
  OpKind kind = OpKind::kRelu;
  std::string name;
  int m = 0, r = 0, n = 0, d_w = 0, d_h = 0;
  Tensor weights;  // rank 0 (empty) for weightless layers

  bool has_weights() const noexcept { return !weights.empty(); }
  ConvSpec conv_spec() const;

  /// Compares structure and weights; names are not part of the file format
  /// and are ignored.
  friend bool operator==(const ModelLayer& a, const ModelLayer& b) {
    return a.kind == b.kind && a.m == b.m && a.r == b.r && a.n == b.n && a.d_w == b.d_w &&
           a.d_h == b.d_h && a.weights == b.weights;
  }
};

/// All learnable weights of a built network, in execution order.
struct ModelParams {
  std::string arch_name;
  std::vector<ModelLayer> layers;

  std::uint64_t total_count() const;
  /// Indices of layers that carry weights.
  std::vector<std::size_t> weighted_layers() const;

  /// Throws FormatError/DimensionError if the primitive list is not
  /// executable (unbalanced residuals, SE halves not adjacent, weight
  /// shapes inconsistent with the channel flow).
  void validate(std::size_t input_channels = 1) const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Expanded layer list with zero weights of the right shapes.
ModelParams expand(const ArchitectureSpec& spec);

/// Deterministic build: zero-mean Gaussian weights with std sqrt(2/fan_in).
ModelParams build(const ArchitectureSpec& spec, std::uint64_t seed);

/// Intermediate values kept by a training-mode forward pass. `inputs[i]`
/// is the activation entering layer i; SE layers also keep the squeeze
/// vector, hidden pre-activation and gates.
struct ForwardTrace {
  std::vector<Tensor> inputs;
  struct SECache {
    Tensor squeeze;
    Tensor hidden_pre;
    Tensor gates;
  };
  std::vector<std::optional<SECache>> se;
  Tensor logits;
};

/// Logits (pre-softmax) for one C x H x W input. When `trace` is non-null
/// it is filled for backpropagation.
Tensor forward_logits(const ModelParams& params, const Tensor& features,
                      ForwardTrace* trace = nullptr, MultiplyCounter* counter = nullptr);

/// Re-runs layers start.. from the activations recorded in `trace`, with
/// the current weights. Layers before `start` are taken as unchanged.
/// `relu_pattern`, if given, receives one on/off flag per rectifier input
/// (SE bottleneck included) from `start` onward.
Tensor forward_logits_from(const ModelParams& params, const ForwardTrace& trace, std::size_t start,
                           std::vector<std::uint8_t>* relu_pattern = nullptr);

/// Class posteriors for one input.
Tensor forward(const ModelParams& params, const Tensor& features);

}  // namespace dsresnet
