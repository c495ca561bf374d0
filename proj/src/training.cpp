// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsresnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "dsresnet/errors.hpp"
#include "dsresnet/random.hpp"

namespace dsresnet {
namespace {

void require_same_shape(const Tensor& a, const std::vector<std::size_t>& shape, const char* what) {
  if (a.shape() != shape) {
    throw DimensionError(std::string(what) + ": gradient shape " + a.shape_string() +
                         " does not match " + shape_string(shape));
  }
}

void accumulate(Tensor& dst, const Tensor& src) {
  if (dst.empty()) {
    dst = src;
    return;
  }
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Tensor crop_same(const Tensor& padded, const ConvSpec& spec, std::size_t h, std::size_t w) {
  const SamePadding ph = same_padding(spec.kernel_h, spec.dilation_h);
  const SamePadding pw = same_padding(spec.kernel_w, spec.dilation_w);
  const std::size_t c = padded.dim(0);
  Tensor out = Tensor::chw(c, h, w);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      const double* src = &padded.at(ch, y + ph.low, pw.low);
      std::copy(src, src + w, &out.at(ch, y, 0));
    }
  }
  return out;
}

std::size_t argmax(const Tensor& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

std::size_t worker_count(std::size_t requested, std::size_t jobs) {
  std::size_t n = requested != 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(n, jobs));
}

// Runs fn(i) for i in [0, jobs) on `threads` workers; rethrows the first
// failure by job index.
template <typename Fn>
void parallel_for(std::size_t jobs, std::size_t threads, Fn&& fn) {
  const std::size_t workers = worker_count(threads, jobs);
  std::vector<std::exception_ptr> errors(jobs);
  auto run = [&](std::size_t first) {
    for (std::size_t i = first; i < jobs; i += workers) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(run, t);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

// ---------------------------------------------------------------- primitive backward

ConvGrads conv2d_standard_backward(const Tensor& input, const Tensor& weights, const ConvSpec& spec,
                                   const Tensor& grad_out) {
  spec.validate();
  require_rank(input, 3, "conv2d_standard_backward input");
  require_rank(weights, 4, "conv2d_standard_backward weights");
  const std::size_t c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t c_out = weights.dim(0);
  const std::size_t m = spec.kernel_h, r = spec.kernel_w;
  const std::size_t dh = spec.dilation_h, dw = spec.dilation_w;
  require_same_shape(grad_out, {c_out, h, w}, "conv2d_standard_backward");
  if (weights.dim(1) != c_in || weights.dim(2) != m || weights.dim(3) != r) {
    throw DimensionError("conv2d_standard_backward: weights " + weights.shape_string() +
                         " do not match input " + input.shape_string());
  }
  const Tensor padded = pad_same(input, spec);
  Tensor grad_padded(padded.shape());
  Tensor grad_w(weights.shape());
  for (std::size_t o = 0; o < c_out; ++o) {
    for (std::size_t c = 0; c < c_in; ++c) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < r; ++j) {
          const std::size_t widx = ((o * c_in + c) * m + i) * r + j;
          const double k = weights[widx];
          double acc = 0.0;
          for (std::size_t y = 0; y < h; ++y) {
            const double* src = &padded.at(c, y + i * dh, j * dw);
            double* dsrc = &grad_padded.at(c, y + i * dh, j * dw);
            const double* g = &grad_out.at(o, y, 0);
            for (std::size_t x = 0; x < w; ++x) {
              acc += g[x] * src[x];
              dsrc[x] += k * g[x];
            }
          }
          grad_w[widx] = acc;
        }
      }
    }
  }
  return {crop_same(grad_padded, spec, h, w), std::move(grad_w)};
}

ConvGrads conv2d_depthwise_backward(const Tensor& input, const Tensor& weights, const ConvSpec& spec,
                                    const Tensor& grad_out) {
  spec.validate();
  require_rank(input, 3, "conv2d_depthwise_backward input");
  require_rank(weights, 3, "conv2d_depthwise_backward weights");
  const std::size_t c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t m = spec.kernel_h, r = spec.kernel_w;
  const std::size_t dh = spec.dilation_h, dw = spec.dilation_w;
  require_same_shape(grad_out, input.shape(), "conv2d_depthwise_backward");
  if (weights.dim(0) != c_in || weights.dim(1) != m || weights.dim(2) != r) {
    throw DimensionError("conv2d_depthwise_backward: weights " + weights.shape_string() +
                         " do not match input " + input.shape_string());
  }
  const Tensor padded = pad_same(input, spec);
  Tensor grad_padded(padded.shape());
  Tensor grad_w(weights.shape());
  for (std::size_t c = 0; c < c_in; ++c) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < r; ++j) {
        const std::size_t widx = (c * m + i) * r + j;
        const double k = weights[widx];
        double acc = 0.0;
        for (std::size_t y = 0; y < h; ++y) {
          const double* src = &padded.at(c, y + i * dh, j * dw);
          double* dsrc = &grad_padded.at(c, y + i * dh, j * dw);
          const double* g = &grad_out.at(c, y, 0);
          for (std::size_t x = 0; x < w; ++x) {
            acc += g[x] * src[x];
            dsrc[x] += k * g[x];
          }
        }
        grad_w[widx] = acc;
      }
    }
  }
  return {crop_same(grad_padded, spec, h, w), std::move(grad_w)};
}

ConvGrads conv2d_pointwise_backward(const Tensor& input, const Tensor& weights,
                                    const Tensor& grad_out) {
  require_rank(input, 3, "conv2d_pointwise_backward input");
  require_rank(weights, 2, "conv2d_pointwise_backward weights");
  const std::size_t c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t c_out = weights.dim(0);
  if (weights.dim(1) != c_in) {
    throw DimensionError("conv2d_pointwise_backward: weights " + weights.shape_string() +
                         " do not match input " + input.shape_string());
  }
  require_same_shape(grad_out, {c_out, h, w}, "conv2d_pointwise_backward");
  const std::size_t plane = h * w;
  Tensor grad_in(input.shape());
  Tensor grad_w(weights.shape());
  for (std::size_t o = 0; o < c_out; ++o) {
    const double* g = grad_out.data() + o * plane;
    for (std::size_t c = 0; c < c_in; ++c) {
      const double* src = input.data() + c * plane;
      double* dsrc = grad_in.data() + c * plane;
      const double k = weights[o * c_in + c];
      double acc = 0.0;
      for (std::size_t p = 0; p < plane; ++p) {
        acc += g[p] * src[p];
        dsrc[p] += k * g[p];
      }
      grad_w[o * c_in + c] = acc;
    }
  }
  return {std::move(grad_in), std::move(grad_w)};
}

ConvGrads fully_connected_backward(const Tensor& input, const Tensor& weights,
                                   const Tensor& grad_out) {
  require_rank(input, 1, "fully_connected_backward input");
  require_rank(weights, 2, "fully_connected_backward weights");
  const std::size_t k = weights.dim(0), c = weights.dim(1);
  if (input.dim(0) != c) {
    throw DimensionError("fully_connected_backward: weights " + weights.shape_string() +
                         " do not match input " + input.shape_string());
  }
  require_same_shape(grad_out, {k}, "fully_connected_backward");
  Tensor grad_in = Tensor::vector(c);
  Tensor grad_w(weights.shape());
  for (std::size_t o = 0; o < k; ++o) {
    for (std::size_t i = 0; i < c; ++i) {
      grad_w[o * c + i] = grad_out[o] * input[i];
      grad_in[i] += weights[o * c + i] * grad_out[o];
    }
  }
  return {std::move(grad_in), std::move(grad_w)};
}

Tensor avg_pool2d_backward(const std::vector<std::size_t>& input_shape, std::size_t window_h,
                           std::size_t window_w, const Tensor& grad_out) {
  if (input_shape.size() != 3 || window_h == 0 || window_w == 0 || input_shape[1] < window_h ||
      input_shape[2] < window_w) {
    throw DimensionError("avg_pool2d_backward: window " + std::to_string(window_h) + "x" +
                         std::to_string(window_w) + " does not fit " + shape_string(input_shape));
  }
  const std::size_t c = input_shape[0];
  const std::size_t ho = (input_shape[1] - window_h) / window_h + 1;
  const std::size_t wo = (input_shape[2] - window_w) / window_w + 1;
  require_same_shape(grad_out, {c, ho, wo}, "avg_pool2d_backward");
  const double scale = 1.0 / static_cast<double>(window_h * window_w);
  Tensor grad_in(input_shape);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < ho; ++y) {
      for (std::size_t x = 0; x < wo; ++x) {
        const double g = grad_out.at(ch, y, x) * scale;
        for (std::size_t a = 0; a < window_h; ++a) {
          for (std::size_t b = 0; b < window_w; ++b) {
            grad_in.at(ch, y * window_h + a, x * window_w + b) = g;
          }
        }
      }
    }
  }
  return grad_in;
}

Tensor global_avg_pool_backward(const std::vector<std::size_t>& input_shape, const Tensor& grad_out) {
  if (input_shape.size() != 3) {
    throw DimensionError("global_avg_pool_backward: need a rank-3 input shape, got " +
                         shape_string(input_shape));
  }
  require_same_shape(grad_out, {input_shape[0]}, "global_avg_pool_backward");
  const double scale = 1.0 / static_cast<double>(input_shape[1] * input_shape[2]);
  Tensor grad_in(input_shape);
  for (std::size_t c = 0; c < input_shape[0]; ++c) {
    std::ranges::fill(grad_in.channel(c), grad_out[c] * scale);
  }
  return grad_in;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
  require_same_shape(grad_out, input.shape(), "relu_backward");
  Tensor grad_in(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) grad_in[i] = input[i] > 0.0 ? grad_out[i] : 0.0;
  return grad_in;
}

SEGrads se_backward(const Tensor& input, const Tensor& reduce, const Tensor& expand,
                    const Tensor& squeeze, const Tensor& hidden_pre, const Tensor& gates,
                    const Tensor& grad_out) {
  require_rank(input, 3, "se_backward input");
  require_same_shape(grad_out, input.shape(), "se_backward");
  const std::size_t c = input.dim(0);
  const std::size_t plane = input.dim(1) * input.dim(2);
  require_same_shape(gates, {c}, "se_backward gates");

  Tensor grad_in(input.shape());
  Tensor grad_gates = Tensor::vector(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* x = input.data() + ch * plane;
    const double* g = grad_out.data() + ch * plane;
    double* dx = grad_in.data() + ch * plane;
    double acc = 0.0;
    for (std::size_t p = 0; p < plane; ++p) {
      acc += g[p] * x[p];
      dx[p] = g[p] * gates[ch];
    }
    grad_gates[ch] = acc;
  }
  Tensor grad_act = Tensor::vector(c);
  for (std::size_t ch = 0; ch < c; ++ch) grad_act[ch] = grad_gates[ch] * gates[ch] * (1.0 - gates[ch]);

  const Tensor hidden = relu(hidden_pre);
  ConvGrads expand_grads = fully_connected_backward(hidden, expand, grad_act);
  const Tensor grad_hidden_pre = relu_backward(hidden_pre, expand_grads.input);
  ConvGrads reduce_grads = fully_connected_backward(squeeze, reduce, grad_hidden_pre);

  for (std::size_t ch = 0; ch < c; ++ch) {
    const double g = reduce_grads.input[ch] / static_cast<double>(plane);
    for (double& v : grad_in.channel(ch)) v += g;
  }
  return {std::move(grad_in), std::move(reduce_grads.weights), std::move(expand_grads.weights)};
}

double cross_entropy(const Tensor& logits, int label) {
  return softmax_cross_entropy(logits, label).first;
}

std::pair<double, Tensor> softmax_cross_entropy(const Tensor& logits, int label) {
  require_rank(logits, 1, "cross_entropy logits");
  require_finite(logits, "cross_entropy");
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw DimensionError("cross_entropy: label " + std::to_string(label) + " outside " +
                         std::to_string(logits.size()) + " classes");
  }
  const double peak = *std::max_element(logits.values().begin(), logits.values().end());
  double sum = 0.0;
  for (double z : logits.values()) sum += std::exp(z - peak);
  const double log_sum = peak + std::log(sum);
  Tensor grad(logits.shape());
  for (std::size_t i = 0; i < logits.size(); ++i) grad[i] = std::exp(logits[i] - log_sum);
  grad[static_cast<std::size_t>(label)] -= 1.0;
  return {log_sum - logits[static_cast<std::size_t>(label)], std::move(grad)};
}

// ---------------------------------------------------------------- network gradients

Gradients Gradients::zeros_like(const ModelParams& params) {
  Gradients g;
  g.layers.reserve(params.layers.size());
  for (const auto& layer : params.layers) {
    g.layers.push_back(layer.has_weights() ? Tensor(layer.weights.shape()) : Tensor());
  }
  return g;
}

void Gradients::add(const Gradients& other) {
  if (other.layers.size() != layers.size()) {
    throw DimensionError("Gradients::add: layer count mismatch");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!other.layers[i].empty()) accumulate(layers[i], other.layers[i]);
  }
}

void Gradients::scale(double factor) {
  for (auto& t : layers) {
    for (double& v : t.values()) v *= factor;
  }
}

Tensor backward(const ModelParams& params, const ForwardTrace& trace, const Tensor& grad_logits,
                Gradients& grads) {
  const auto& layers = params.layers;
  if (trace.inputs.size() != layers.size()) {
    throw DimensionError("backward: trace has " + std::to_string(trace.inputs.size()) +
                         " layers, model has " + std::to_string(layers.size()));
  }
  if (grads.layers.size() != layers.size()) grads = Gradients::zeros_like(params);

  Tensor g = grad_logits;
  std::vector<Tensor> skip_grads;
  for (std::size_t i = layers.size(); i-- > 0;) {
    const ModelLayer& layer = layers[i];
    const Tensor& x = trace.inputs[i];
    switch (layer.kind) {
      case OpKind::kStandardConv: {
        ConvGrads r = conv2d_standard_backward(x, layer.weights, layer.conv_spec(), g);
        accumulate(grads.layers[i], r.weights);
        g = std::move(r.input);
        break;
      }
      case OpKind::kDepthwiseConv: {
        ConvGrads r = conv2d_depthwise_backward(x, layer.weights, layer.conv_spec(), g);
        accumulate(grads.layers[i], r.weights);
        g = std::move(r.input);
        break;
      }
      case OpKind::kPointwiseConv: {
        ConvGrads r = conv2d_pointwise_backward(x, layer.weights, g);
        accumulate(grads.layers[i], r.weights);
        g = std::move(r.input);
        break;
      }
      case OpKind::kSEExpand: {
        if (i == 0 || layers[i - 1].kind != OpKind::kSEReduce || !trace.se[i - 1]) {
          throw FormatError("backward: se_expand '" + layer.name + "' without a recorded se_reduce");
        }
        const auto& cache = *trace.se[i - 1];
        SEGrads r = se_backward(x, layers[i - 1].weights, layer.weights, cache.squeeze,
                                cache.hidden_pre, cache.gates, g);
        accumulate(grads.layers[i - 1], r.reduce);
        accumulate(grads.layers[i], r.expand);
        g = std::move(r.input);
        break;
      }
      case OpKind::kSEReduce:
        break;
      case OpKind::kAvgPool:
        g = avg_pool2d_backward(x.shape(), layer.m, layer.r, g);
        break;
      case OpKind::kResidualEnd:
        skip_grads.push_back(g);
        break;
      case OpKind::kResidualBegin:
        if (skip_grads.empty()) throw FormatError("backward: unbalanced residual at '" + layer.name + "'");
        accumulate(g, skip_grads.back());
        skip_grads.pop_back();
        break;
      case OpKind::kRelu:
        g = relu_backward(x, g);
        break;
      case OpKind::kGlobalAvgPool:
        g = global_avg_pool_backward(x.shape(), g);
        break;
      case OpKind::kSoftmaxFC: {
        ConvGrads r = fully_connected_backward(x, layer.weights, g);
        accumulate(grads.layers[i], r.weights);
        g = std::move(r.input);
        break;
      }
    }
  }
  return g;
}

double loss_and_gradient(const ModelParams& params, const Tensor& features, int label,
                         Gradients& grads) {
  ForwardTrace trace;
  const Tensor logits = forward_logits(params, features, &trace);
  auto [loss, grad_logits] = softmax_cross_entropy(logits, label);
  backward(params, trace, grad_logits, grads);
  return loss;
}

// ---------------------------------------------------------------- data

TensorExamples::TensorExamples(std::vector<Tensor> features, std::vector<int> labels)
    : features_(std::move(features)), labels_(std::move(labels)) {
  if (features_.size() != labels_.size()) {
    throw DimensionError("TensorExamples: " + std::to_string(features_.size()) + " feature maps but " +
                         std::to_string(labels_.size()) + " labels");
  }
}

void TensorExamples::add(Tensor features, int label) {
  features_.push_back(std::move(features));
  labels_.push_back(label);
}

// ---------------------------------------------------------------- optimization

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
  if (lr_decay_every == 0) throw ConfigError("train: lr_decay_every must be positive");
  if (eval_every == 0) throw ConfigError("train: eval_every must be positive");
  if (!(lr_initial >= 0.0) || !std::isfinite(lr_initial)) throw ConfigError("train: bad lr_initial");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw ConfigError("train: bad weight_decay");
  if (!(lr_decay > 0.0) || !std::isfinite(lr_decay)) throw ConfigError("train: bad lr_decay");
}

double lr_at(std::uint64_t step, const TrainConfig& config) {
  const auto stage = static_cast<double>(step / config.lr_decay_every);
  return config.lr_initial * std::pow(config.lr_decay, stage);
}

SgdMomentum::SgdMomentum(const ModelParams& params, double momentum, double weight_decay)
    : momentum_(momentum), weight_decay_(weight_decay) {
  velocity_.reserve(params.layers.size());
  for (const auto& layer : params.layers) velocity_.emplace_back(layer.weights.shape());
}

void SgdMomentum::step(ModelParams& params, const Gradients& grads, double lr) {
  if (params.layers.size() != velocity_.size() || grads.layers.size() != velocity_.size()) {
    throw DimensionError("SgdMomentum::step: layer count mismatch");
  }
  for (std::size_t i = 0; i < velocity_.size(); ++i) {
    Tensor& w = params.layers[i].weights;
    if (w.empty()) continue;
    const Tensor& g = grads.layers[i];
    Tensor& v = velocity_[i];
    require_same_shape(g, w.shape(), "SgdMomentum::step");
    for (std::size_t k = 0; k < w.size(); ++k) {
      v[k] = momentum_ * v[k] - lr * (g[k] + weight_decay_ * w[k]);
      w[k] += v[k];
    }
  }
}

EvalResult evaluate(const ModelParams& params, const ExampleSource& examples) {
  if (examples.size() == 0) throw ConfigError("evaluate: no examples");
  if (params.layers.empty() || params.layers.back().kind != OpKind::kSoftmaxFC) {
    throw FormatError("evaluate: model does not end in a classifier layer");
  }
  const std::size_t classes = params.layers.back().weights.dim(0);
  EvalResult result;
  result.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const int label = examples.label(i);
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw ConfigError("evaluate: label " + std::to_string(label) + " outside " +
                        std::to_string(classes) + " classes");
    }
    const std::size_t predicted = argmax(forward_logits(params, examples.eval_features(i)));
    ++result.confusion[static_cast<std::size_t>(label)][predicted];
    if (predicted != static_cast<std::size_t>(label)) ++result.n_errors;
  }
  result.n_examples = examples.size();
  result.error_rate = static_cast<double>(result.n_errors) / static_cast<double>(result.n_examples);
  return result;
}

ConfidenceInterval confidence_interval(const std::vector<double>& values) {
  if (values.size() < 2) throw ConfigError("confidence_interval: need at least two values");
  const auto n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  return {mean, 1.96 * sd / std::sqrt(n)};
}

TrainResult train(ModelParams initial, const ExampleSource& train_set,
                  const ExampleSource& validation_set, const TrainConfig& config,
                  const std::function<void(const LogEntry&)>& on_eval) {
  config.validate();
  if (train_set.size() == 0) throw ConfigError("train: empty training set");
  if (validation_set.size() == 0) throw ConfigError("train: empty validation set");

  TrainResult result;
  result.best = initial;
  ModelParams params = std::move(initial);
  SgdMomentum optimizer(params, config.momentum, config.weight_decay);

  Rng order_rng(derive_seed(config.seed, "batch_order"));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  order_rng.shuffle(order.begin(), order.end());
  std::size_t cursor = 0;
  std::uint64_t epoch = 0;

  std::vector<std::size_t> batch(config.batch_size);
  std::vector<std::uint64_t> batch_epoch(config.batch_size);
  std::vector<Gradients> per_example(config.batch_size);
  std::vector<double> losses(config.batch_size);
  double interval_loss = 0.0;
  std::uint64_t interval_steps = 0;

  for (std::uint64_t step = 0; step < config.total_steps; ++step) {
    const std::uint64_t step_number = step + 1;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      if (cursor == order.size()) {
        order_rng.shuffle(order.begin(), order.end());
        cursor = 0;
        ++epoch;
      }
      batch[b] = order[cursor++];
      batch_epoch[b] = epoch;
    }
    try {
      parallel_for(config.batch_size, config.threads, [&](std::size_t b) {
        per_example[b] = Gradients::zeros_like(params);
        const Tensor features = train_set.train_features(batch[b], batch_epoch[b]);
        losses[b] = loss_and_gradient(params, features, train_set.label(batch[b]), per_example[b]);
      });
    } catch (const NumericError& e) {
      throw TrainingError("step " + std::to_string(step_number) + ": " + e.what());
    }
    Gradients grads = Gradients::zeros_like(params);
    double loss = 0.0;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      grads.add(per_example[b]);
      loss += losses[b];
    }
    const double inv = 1.0 / static_cast<double>(config.batch_size);
    grads.scale(inv);
    loss *= inv;
    if (!std::isfinite(loss)) {
      throw TrainingError("step " + std::to_string(step_number) + ": non-finite loss");
    }
    const double lr = lr_at(step, config);
    optimizer.step(params, grads, lr);
    interval_loss += loss;
    ++interval_steps;
    result.steps_run = step_number;

    if (step_number % config.eval_every == 0 || step_number == config.total_steps) {
      EvalResult eval;
      try {
        eval = evaluate(params, validation_set);
      } catch (const NumericError& e) {
        throw TrainingError("step " + std::to_string(step_number) + ": " + e.what());
      }
      LogEntry entry{step_number, lr, interval_loss / static_cast<double>(interval_steps),
                     eval.error_rate};
      interval_loss = 0.0;
      interval_steps = 0;
      result.log.push_back(entry);
      if (on_eval) on_eval(entry);
      if (eval.accuracy() > result.best_val_accuracy) {
        result.best_val_accuracy = eval.accuracy();
        result.best = params;
        result.best_step = step_number;
      }
      if (config.stop_at_accuracy && eval.accuracy() >= *config.stop_at_accuracy) break;
    }
  }
  result.final_params = std::move(params);
  return result;
}

TrainResult train(const ArchitectureSpec& spec, const ExampleSource& train_set,
                  const ExampleSource& validation_set, const TrainConfig& config,
                  const std::function<void(const LogEntry&)>& on_eval) {
  return train(build(spec, config.seed), train_set, validation_set, config, on_eval);
}

// ---------------------------------------------------------------- gradient check

std::vector<TensorCheck> gradient_check(const ModelParams& params, const Tensor& features, int label,
                                        const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw ConfigError("gradient_check: step must be positive");
  ForwardTrace trace;
  const Tensor logits = forward_logits(params, features, &trace);
  auto [loss, grad_logits] = softmax_cross_entropy(logits, label);
  Gradients analytic = Gradients::zeros_like(params);
  backward(params, trace, grad_logits, analytic);

  ModelParams probe = params;
  std::vector<TensorCheck> report;
  for (std::size_t li : params.weighted_layers()) {
    Tensor& w = probe.layers[li].weights;
    std::vector<std::size_t> entries(w.size());
    std::iota(entries.begin(), entries.end(), 0);
    if (options.max_entries_per_tensor != 0 && options.max_entries_per_tensor < entries.size()) {
      Rng rng(derive_seed(options.seed, "gradcheck", li));
      rng.shuffle(entries.begin(), entries.end());
      entries.resize(options.max_entries_per_tensor);
      std::sort(entries.begin(), entries.end());
    }
    TensorCheck check;
    check.name = params.layers[li].name.empty() ? std::to_string(li) : params.layers[li].name;
    check.total = w.size();
    check.checked = entries.size();
    std::vector<std::uint8_t> base_pattern, plus_pattern, minus_pattern;
    const double base = cross_entropy(forward_logits_from(probe, trace, li, &base_pattern), label);
    double scale = 0.0;
    for (std::size_t k : entries) {
      const double original = w[k];
      w[k] = original + options.step;
      const double plus = cross_entropy(forward_logits_from(probe, trace, li, &plus_pattern), label);
      w[k] = original - options.step;
      const double minus = cross_entropy(forward_logits_from(probe, trace, li, &minus_pattern), label);
      w[k] = original;
      const bool plus_kink = plus_pattern != base_pattern;
      const bool minus_kink = minus_pattern != base_pattern;
      double numeric = (plus - minus) / (2.0 * options.step);
      if (plus_kink != minus_kink) {
        ++check.kinks;
        numeric = plus_kink ? (base - minus) / options.step : (plus - base) / options.step;
      } else if (plus_kink) {
        ++check.unresolved_kinks;
      }
      const double a = analytic.layers[li][k];
      check.max_abs_error = std::max(check.max_abs_error, std::abs(a - numeric));
      scale = std::max({scale, std::abs(a), std::abs(numeric)});
    }
    check.max_rel_error = scale > 0.0 ? check.max_abs_error / scale : 0.0;
    report.push_back(std::move(check));
  }
  return report;
}

}  // namespace dsresnet
