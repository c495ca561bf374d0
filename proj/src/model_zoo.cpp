// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsresnet/model_zoo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dsresnet/errors.hpp"
#include "dsresnet/random.hpp"

namespace dsresnet {
namespace {

LayerConfig conv(int m, int r, int n) { return {LayerKind::kStandardConv, m, r, n, 1, 1}; }
LayerConfig se(int n) { return {LayerKind::kSE, 0, 0, n, 0, 0}; }
LayerConfig avg_pool(int m, int r) { return {LayerKind::kAvgPool, m, r, 0, 0, 0}; }
LayerConfig residual(int n, int blocks) {
  return {LayerKind::kResidualGroup, 3, 3, n, 0, 0, blocks, 2};
}
LayerConfig ds_conv(int n, int count) { return {LayerKind::kDSConv, 3, 3, n, 0, 0, count}; }
LayerConfig global_pool() { return {LayerKind::kGlobalAvgPool, 0, 0, 0, 0, 0}; }
LayerConfig softmax_fc(int classes) { return {LayerKind::kSoftmaxFC, 0, 0, classes, 0, 0}; }

std::string label(std::size_t index, const LayerConfig& layer) {
  return "layer " + std::to_string(index) + " (" + to_string(layer.kind) + ")";
}

// Walks an ArchitectureSpec and emits primitive layers with zero weights.
class Expander {
 public:
  explicit Expander(const ArchitectureSpec& spec) : spec_(spec), channels_(spec.input_channels) {}

  ModelParams run() {
    out_.arch_name = spec_.name;
    for (const LayerConfig& layer : spec_.layers) emit(layer);
    return std::move(out_);
  }

 private:
  void push(OpKind kind, std::string name, int m, int r, int n, int d_w, int d_h,
            std::vector<std::size_t> shape) {
    ModelLayer layer;
    layer.kind = kind;
    layer.name = std::move(name);
    layer.m = m;
    layer.r = r;
    layer.n = n;
    layer.d_w = d_w;
    layer.d_h = d_h;
    if (!shape.empty()) layer.weights = Tensor(std::move(shape));
    out_.layers.push_back(std::move(layer));
  }

  void push_plain(OpKind kind, std::string name) { push(kind, std::move(name), 0, 0, 0, 0, 0, {}); }

  void push_se(const std::string& prefix) {
    const SEConfig config{channels_, spec_.se_reduction};
    const auto b = config.bottleneck_dim();
    const int c = static_cast<int>(channels_);
    push(OpKind::kSEReduce, prefix + ".reduce", 0, 0, static_cast<int>(b), 0, 0, {b, channels_});
    push(OpKind::kSEExpand, prefix + ".expand", 0, 0, c, 0, 0, {channels_, b});
  }

  void push_ds(const std::string& prefix, const LayerConfig& cfg) {
    const int d_h = cfg.d_h > 0 ? cfg.d_h : dilation_schedule(ds_index_);
    const int d_w = cfg.d_w > 0 ? cfg.d_w : dilation_schedule(ds_index_);
    const std::size_t m = cfg.m, r = cfg.r, n = cfg.n;
    push(OpKind::kDepthwiseConv, prefix + ".depthwise", cfg.m, cfg.r, static_cast<int>(channels_),
         d_w, d_h, {channels_, m, r});
    if (spec_.ds_se == SEPlacement::kAfterDepthwise) push_se(prefix + ".se");
    push(OpKind::kPointwiseConv, prefix + ".pointwise", 1, 1, cfg.n, 1, 1, {n, channels_});
    channels_ = n;
    if (spec_.ds_se == SEPlacement::kAfterPointwise) push_se(prefix + ".se");
    ++ds_index_;
  }

  void emit(const LayerConfig& cfg) {
    switch (cfg.kind) {
      case LayerKind::kStandardConv: {
        const std::size_t m = cfg.m, r = cfg.r, n = cfg.n;
        push(OpKind::kStandardConv, "conv" + std::to_string(conv_count_), cfg.m, cfg.r, cfg.n,
             std::max(cfg.d_w, 1), std::max(cfg.d_h, 1), {n, channels_, m, r});
        channels_ = n;
        push_plain(OpKind::kRelu, "conv" + std::to_string(conv_count_++) + ".relu");
        break;
      }
      case LayerKind::kSE:
        push_se("se" + std::to_string(se_count_++));
        break;
      case LayerKind::kAvgPool:
        push(OpKind::kAvgPool, "pool" + std::to_string(pool_count_++), cfg.m, cfg.r, 0, 0, 0, {});
        break;
      case LayerKind::kResidualGroup:
        for (int b = 0; b < cfg.repeat; ++b) {
          const std::string block = "block" + std::to_string(block_count_++);
          push_plain(OpKind::kResidualBegin, block + ".begin");
          for (int l = 0; l < cfg.layers_per_block; ++l) {
            const std::string prefix = block + ".ds" + std::to_string(l);
            push_ds(prefix, cfg);
            if (l + 1 < cfg.layers_per_block) push_plain(OpKind::kRelu, prefix + ".relu");
          }
          push_plain(OpKind::kResidualEnd, block + ".add");
          push_plain(OpKind::kRelu, block + ".relu");
        }
        break;
      case LayerKind::kDSConv:
        for (int k = 0; k < cfg.repeat; ++k) {
          const std::string prefix = "ds" + std::to_string(plain_ds_count_++);
          push_ds(prefix, cfg);
          push_plain(OpKind::kRelu, prefix + ".relu");
        }
        break;
      case LayerKind::kGlobalAvgPool:
        push_plain(OpKind::kGlobalAvgPool, "global_pool");
        break;
      case LayerKind::kSoftmaxFC: {
        const std::size_t n = cfg.n;
        push(OpKind::kSoftmaxFC, "fc", 0, 0, cfg.n, 0, 0, {n, channels_});
        channels_ = n;
        break;
      }
    }
  }

  const ArchitectureSpec& spec_;
  ModelParams out_;
  std::size_t channels_;
  int ds_index_ = 0;
  int conv_count_ = 0, se_count_ = 0, pool_count_ = 0, block_count_ = 0, plain_ds_count_ = 0;
};

std::size_t fan_in(const ModelLayer& layer) {
  const auto& s = layer.weights.shape();
  switch (layer.kind) {
    case OpKind::kStandardConv:
      return s[1] * s[2] * s[3];
    case OpKind::kDepthwiseConv:
      return s[1] * s[2];
    default:
      return s[1];
  }
}

}  // namespace

const char* to_string(LayerKind kind) noexcept {
  switch (kind) {
    case LayerKind::kStandardConv: return "conv";
    case LayerKind::kSE: return "se";
    case LayerKind::kAvgPool: return "avg_pool";
    case LayerKind::kResidualGroup: return "res";
    case LayerKind::kDSConv: return "ds_conv";
    case LayerKind::kGlobalAvgPool: return "global_avg_pool";
    case LayerKind::kSoftmaxFC: return "softmax";
  }
  return "?";
}

const char* to_string(OpKind kind) noexcept {
  switch (kind) {
    case OpKind::kStandardConv: return "standard_conv";
    case OpKind::kDepthwiseConv: return "depthwise_conv";
    case OpKind::kPointwiseConv: return "pointwise_conv";
    case OpKind::kSEReduce: return "se_reduce";
    case OpKind::kSEExpand: return "se_expand";
    case OpKind::kAvgPool: return "avg_pool";
    case OpKind::kResidualBegin: return "residual_begin";
    case OpKind::kResidualEnd: return "residual_end";
    case OpKind::kRelu: return "relu";
    case OpKind::kGlobalAvgPool: return "global_avg_pool";
    case OpKind::kSoftmaxFC: return "softmax_fc";
  }
  return "?";
}

bool is_known_op(std::uint32_t tag) noexcept { return tag >= 1 && tag <= 11; }

void ArchitectureSpec::validate() const {
  if (layers.size() < 2 || layers[layers.size() - 2].kind != LayerKind::kGlobalAvgPool ||
      layers.back().kind != LayerKind::kSoftmaxFC) {
    throw ConfigError("architecture '" + name +
                      "': must end with global_avg_pool followed by softmax");
  }
  if (input_channels < 1 || input_height < 1 || input_width < 1 || num_classes < 1) {
    throw ConfigError("architecture '" + name + "': input shape and class count must be positive");
  }
  std::size_t channels = input_channels, h = input_height, w = input_width;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerConfig& l = layers[i];
    const bool tail = i + 2 >= layers.size();
    if (!tail && (l.kind == LayerKind::kGlobalAvgPool || l.kind == LayerKind::kSoftmaxFC)) {
      throw ConfigError(label(i, l) + ": only allowed at the end of the stack");
    }
    if (l.d_w < 0 || l.d_h < 0) throw ConfigError(label(i, l) + ": negative dilation");
    switch (l.kind) {
      case LayerKind::kStandardConv:
        if (l.m < 1 || l.r < 1 || l.n < 1) throw ConfigError(label(i, l) + ": m, r, n must be >= 1");
        channels = l.n;
        break;
      case LayerKind::kSE:
        if (l.n != 0 && static_cast<std::size_t>(l.n) != channels) {
          throw DimensionError(label(i, l) + ": SE channels " + std::to_string(l.n) +
                               " != incoming " + std::to_string(channels));
        }
        break;
      case LayerKind::kAvgPool:
        if (l.m < 1 || l.r < 1) throw ConfigError(label(i, l) + ": pooling window must be >= 1");
        if (static_cast<std::size_t>(l.m) > h || static_cast<std::size_t>(l.r) > w) {
          throw DimensionError(label(i, l) + ": pooling window exceeds " + std::to_string(h) +
                               "x" + std::to_string(w) + " feature map");
        }
        h = (h - l.m) / l.m + 1;
        w = (w - l.r) / l.r + 1;
        break;
      case LayerKind::kResidualGroup:
        if (static_cast<std::size_t>(l.n) != channels) {
          throw DimensionError(label(i, l) + ": identity shortcut needs equal in/out channels (" +
                               std::to_string(channels) + " in, " + std::to_string(l.n) + " out)");
        }
        if (l.layers_per_block < 1) throw ConfigError(label(i, l) + ": layers_per_block must be >= 1");
        [[fallthrough]];
      case LayerKind::kDSConv:
        if (l.m < 1 || l.r < 1 || l.n < 1) throw ConfigError(label(i, l) + ": m, r, n must be >= 1");
        if (l.repeat < 1) throw ConfigError(label(i, l) + ": repeat count must be >= 1");
        channels = l.n;
        break;
      case LayerKind::kGlobalAvgPool:
        break;
      case LayerKind::kSoftmaxFC:
        if (static_cast<std::size_t>(l.n) != num_classes) {
          throw ConfigError(label(i, l) + ": softmax width " + std::to_string(l.n) +
                            " != num_classes " + std::to_string(num_classes));
        }
        break;
    }
  }
}

int dilation_schedule(int ds_index) {
  if (ds_index < 0) throw ConfigError("dilation_schedule: negative layer index");
  return 1 << (ds_index / 3);
}

std::vector<std::string> preset_names() {
  return {"DS-ResNet18", "DS-ResNet14", "DS-ResNet10",
          "DS-ResNet18-n", "DS-ResNet18-d", "DS-ResNet18-p"};
}

ArchitectureSpec preset(const std::string& name) {
  ArchitectureSpec spec;
  spec.name = name;
  if (name == "DS-ResNet18" || name == "DS-ResNet18-d" || name == "DS-ResNet18-p") {
    spec.layers = {conv(3, 3, 64), se(64), residual(64, 7), ds_conv(64, 1), global_pool(),
                   softmax_fc(12)};
    if (name == "DS-ResNet18-d") spec.ds_se = SEPlacement::kAfterDepthwise;
    if (name == "DS-ResNet18-p") spec.ds_se = SEPlacement::kAfterPointwise;
  } else if (name == "DS-ResNet18-n") {
    spec.layers = {conv(3, 3, 64), residual(64, 7), ds_conv(64, 1), global_pool(), softmax_fc(12)};
  } else if (name == "DS-ResNet14") {
    spec.layers = {conv(3, 3, 32), se(32),         avg_pool(2, 2), residual(32, 5),
                   ds_conv(32, 1), global_pool(), softmax_fc(12)};
  } else if (name == "DS-ResNet10") {
    spec.layers = {conv(3, 3, 32),  se(32),        avg_pool(4, 2),
                   ds_conv(32, 7), global_pool(), softmax_fc(12)};
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return spec;
}

int ds_layer_count(const ArchitectureSpec& spec) {
  int count = 0;
  for (const LayerConfig& l : spec.layers) {
    if (l.kind == LayerKind::kResidualGroup) count += l.repeat * l.layers_per_block;
    if (l.kind == LayerKind::kDSConv) count += l.repeat;
  }
  return count;
}

ReceptiveField receptive_field(const ArchitectureSpec& spec) {
  ReceptiveField rf;
  std::size_t jump_t = 1, jump_f = 1;
  int ds_index = 0;
  auto add_kernel = [&](int m, int r, int d_h, int d_w) {
    rf.time += static_cast<std::size_t>(m - 1) * d_h * jump_t;
    rf.freq += static_cast<std::size_t>(r - 1) * d_w * jump_f;
  };
  for (const LayerConfig& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::kStandardConv:
        add_kernel(l.m, l.r, std::max(l.d_h, 1), std::max(l.d_w, 1));
        break;
      case LayerKind::kAvgPool:
        add_kernel(l.m, l.r, 1, 1);
        jump_t *= l.m;
        jump_f *= l.r;
        break;
      case LayerKind::kResidualGroup:
      case LayerKind::kDSConv: {
        const int count = l.kind == LayerKind::kDSConv ? l.repeat : l.repeat * l.layers_per_block;
        for (int k = 0; k < count; ++k, ++ds_index) {
          add_kernel(l.m, l.r, l.d_h > 0 ? l.d_h : dilation_schedule(ds_index),
                     l.d_w > 0 ? l.d_w : dilation_schedule(ds_index));
        }
        break;
      }
      default:
        break;
    }
  }
  return rf;
}

ConvSpec ModelLayer::conv_spec() const {
  ConvSpec spec;
  spec.kernel_h = m;
  spec.kernel_w = r;
  spec.out_channels = n;
  spec.dilation_h = d_h;
  spec.dilation_w = d_w;
  spec.kind = kind == OpKind::kDepthwiseConv ? ConvKind::kDepthwise
              : kind == OpKind::kPointwiseConv ? ConvKind::kPointwise
                                               : ConvKind::kStandard;
  return spec;
}

std::uint64_t ModelParams::total_count() const {
  std::uint64_t total = 0;
  for (const ModelLayer& l : layers) total += l.weights.size();
  return total;
}

std::vector<std::size_t> ModelParams::weighted_layers() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].has_weights()) out.push_back(i);
  }
  return out;
}

void ModelParams::validate(std::size_t input_channels) const {
  std::size_t channels = input_channels;
  std::vector<std::size_t> open_blocks;
  bool vector_mode = false;
  auto fail = [&](std::size_t i, const std::string& why) {
    throw FormatError("model layer " + std::to_string(i) + " (" + to_string(layers[i].kind) +
                      " '" + layers[i].name + "'): " + why);
  };
  auto expect_shape = [&](std::size_t i, std::vector<std::size_t> shape) {
    if (layers[i].weights.shape() != shape) {
      fail(i, "weights " + layers[i].weights.shape_string() + ", expected " + shape_string(shape));
    }
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const ModelLayer& l = layers[i];
    if (vector_mode && l.kind != OpKind::kSoftmaxFC) fail(i, "only softmax_fc may follow global pooling");
    const bool weighted = l.kind == OpKind::kStandardConv || l.kind == OpKind::kDepthwiseConv ||
                          l.kind == OpKind::kPointwiseConv || l.kind == OpKind::kSEReduce ||
                          l.kind == OpKind::kSEExpand || l.kind == OpKind::kSoftmaxFC;
    if (!weighted && l.has_weights()) fail(i, "weightless layer carries a tensor");
    switch (l.kind) {
      case OpKind::kStandardConv:
        if (l.m < 1 || l.r < 1 || l.n < 1 || l.d_w < 1 || l.d_h < 1) fail(i, "bad conv config");
        expect_shape(i, {static_cast<std::size_t>(l.n), channels, static_cast<std::size_t>(l.m),
                         static_cast<std::size_t>(l.r)});
        channels = l.n;
        break;
      case OpKind::kDepthwiseConv:
        if (l.m < 1 || l.r < 1 || l.d_w < 1 || l.d_h < 1) fail(i, "bad conv config");
        if (static_cast<std::size_t>(l.n) != channels) fail(i, "depthwise n must equal channels");
        expect_shape(i, {channels, static_cast<std::size_t>(l.m), static_cast<std::size_t>(l.r)});
        break;
      case OpKind::kPointwiseConv:
        if (l.n < 1) fail(i, "bad conv config");
        expect_shape(i, {static_cast<std::size_t>(l.n), channels});
        channels = l.n;
        break;
      case OpKind::kSEReduce: {
        if (i + 1 >= layers.size() || layers[i + 1].kind != OpKind::kSEExpand) {
          fail(i, "se_reduce must be followed by se_expand");
        }
        if (l.weights.rank() != 2) fail(i, "se_reduce weights must be rank 2");
        const std::size_t b = l.weights.dim(0);
        expect_shape(i, {b, channels});
        expect_shape(i + 1, {channels, b});
        break;
      }
      case OpKind::kSEExpand:
        if (i == 0 || layers[i - 1].kind != OpKind::kSEReduce) fail(i, "se_expand without se_reduce");
        break;
      case OpKind::kAvgPool:
        if (l.m < 1 || l.r < 1) fail(i, "bad pooling window");
        break;
      case OpKind::kResidualBegin:
        open_blocks.push_back(channels);
        break;
      case OpKind::kResidualEnd:
        if (open_blocks.empty()) fail(i, "residual_end without residual_begin");
        if (open_blocks.back() != channels) fail(i, "residual branch changes channel count");
        open_blocks.pop_back();
        break;
      case OpKind::kRelu:
        break;
      case OpKind::kGlobalAvgPool:
        vector_mode = true;
        break;
      case OpKind::kSoftmaxFC:
        if (!vector_mode) fail(i, "softmax_fc requires global pooling first");
        if (l.weights.rank() != 2) fail(i, "softmax_fc weights must be rank 2");
        expect_shape(i, {l.weights.dim(0), channels});
        channels = l.weights.dim(0);
        break;
    }
  }
  if (!open_blocks.empty()) throw FormatError("model: unterminated residual block");
  if (layers.empty() || layers.back().kind != OpKind::kSoftmaxFC) {
    throw FormatError("model: must end with softmax_fc");
  }
}

ModelParams expand(const ArchitectureSpec& spec) {
  spec.validate();
  return Expander(spec).run();
}

ModelParams build(const ArchitectureSpec& spec, std::uint64_t seed) {
  ModelParams params = expand(spec);
  Rng rng(derive_seed(seed, "init"));
  for (ModelLayer& layer : params.layers) {
    if (!layer.has_weights()) continue;
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in(layer)));
    for (double& v : layer.weights.values()) v = stddev * rng.normal();
  }
  return params;
}

namespace {

void record_signs(const Tensor& pre, std::vector<std::uint8_t>* pattern) {
  if (!pattern) return;
  for (double v : pre.values()) pattern->push_back(v > 0.0);
}

Tensor run_layers(const ModelParams& params, Tensor x, std::size_t start, std::vector<Tensor> shortcuts,
                  ForwardTrace* trace, MultiplyCounter* counter, std::vector<std::uint8_t>* pattern = nullptr) {
  const auto& layers = params.layers;
  Tensor gates;
  for (std::size_t i = start; i < layers.size(); ++i) {
    const ModelLayer& layer = layers[i];
    Tensor y;
    switch (layer.kind) {
      case OpKind::kStandardConv:
        y = conv2d_standard(x, layer.weights, layer.conv_spec(), counter);
        break;
      case OpKind::kDepthwiseConv:
        y = conv2d_depthwise(x, layer.weights, layer.conv_spec(), counter);
        break;
      case OpKind::kPointwiseConv:
        y = conv2d_pointwise(x, layer.weights, counter);
        break;
      case OpKind::kSEReduce: {
        if (i + 1 >= layers.size() || layers[i + 1].kind != OpKind::kSEExpand) {
          throw FormatError("forward: se_reduce '" + layer.name + "' not followed by se_expand");
        }
        SEWeights w{layer.weights, layers[i + 1].weights};
        Tensor squeeze = global_avg_pool(x);
        Tensor hidden_pre = fully_connected(squeeze, w.reduce, counter);
        record_signs(hidden_pre, pattern);
        gates = sigmoid(fully_connected(relu(hidden_pre), w.expand, counter));
        if (trace) trace->se[i] = ForwardTrace::SECache{squeeze, hidden_pre, gates};
        y = x;
        break;
      }
      case OpKind::kSEExpand:
        y = x;
        for (std::size_t c = 0; c < y.dim(0); ++c) {
          for (double& v : y.channel(c)) v *= gates[c];
        }
        if (counter) counter->multiplies += y.dim(0);
        break;
      case OpKind::kAvgPool:
        y = avg_pool2d(x, layer.m, layer.r, counter);
        break;
      case OpKind::kResidualBegin:
        shortcuts.push_back(x);
        y = x;
        break;
      case OpKind::kResidualEnd: {
        if (shortcuts.empty() || shortcuts.back().shape() != x.shape()) {
          throw DimensionError("forward: residual shortcut shape mismatch at '" + layer.name + "'");
        }
        y = x;
        const Tensor& skip = shortcuts.back();
        for (std::size_t k = 0; k < y.size(); ++k) y[k] += skip[k];
        shortcuts.pop_back();
        break;
      }
      case OpKind::kRelu:
        record_signs(x, pattern);
        y = relu(x);
        break;
      case OpKind::kGlobalAvgPool:
        y = global_avg_pool(x, counter);
        break;
      case OpKind::kSoftmaxFC:
        y = fully_connected(x, layer.weights, counter);
        break;
    }
    if (trace) trace->inputs[i] = std::move(x);
    x = std::move(y);
  }
  if (!x.all_finite()) throw NumericError("forward: non-finite logits");
  if (trace) trace->logits = x;
  return x;
}

}  // namespace

Tensor forward_logits(const ModelParams& params, const Tensor& features, ForwardTrace* trace,
                      MultiplyCounter* counter) {
  require_rank(features, 3, "forward input");
  require_finite(features, "forward");
  if (trace) {
    trace->inputs.assign(params.layers.size(), Tensor());
    trace->se.assign(params.layers.size(), std::nullopt);
  }
  return run_layers(params, features, 0, {}, trace, counter);
}

Tensor forward_logits_from(const ModelParams& params, const ForwardTrace& trace, std::size_t start,
                           std::vector<std::uint8_t>* relu_pattern) {
  const auto& layers = params.layers;
  if (start >= layers.size() || trace.inputs.size() != layers.size()) {
    throw DimensionError("forward_logits_from: start layer " + std::to_string(start) +
                         " outside a trace of " + std::to_string(trace.inputs.size()) + " layers");
  }
  if (layers[start].kind == OpKind::kSEExpand && start > 0) --start;
  std::vector<Tensor> shortcuts;
  for (std::size_t i = 0; i < start; ++i) {
    if (layers[i].kind == OpKind::kResidualBegin) shortcuts.push_back(trace.inputs[i]);
    if (layers[i].kind == OpKind::kResidualEnd && !shortcuts.empty()) shortcuts.pop_back();
  }
  if (relu_pattern) relu_pattern->clear();
  return run_layers(params, trace.inputs[start], start, std::move(shortcuts), nullptr, nullptr, relu_pattern);
}

Tensor forward(const ModelParams& params, const Tensor& features) {
  return softmax(forward_logits(params, features));
}

}  // namespace dsresnet
