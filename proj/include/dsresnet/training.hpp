// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode gradients for every primitive, softmax cross-entropy,
// SGD with momentum and coupled L2 decay, the step learning-rate schedule,
// evaluation and finite-difference gradient checking.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dsresnet/model_zoo.hpp"
#include "dsresnet/nn_ops.hpp"
#include "dsresnet/tensor.hpp"

namespace dsresnet {

// ---------------------------------------------------------------- primitive backward

struct ConvGrads {
  Tensor input;
  Tensor weights;
};

ConvGrads conv2d_standard_backward(const Tensor& input, const Tensor& weights,
                                   const ConvSpec& spec, const Tensor& grad_out);
ConvGrads conv2d_depthwise_backward(const Tensor& input, const Tensor& weights,
                                    const ConvSpec& spec, const Tensor& grad_out);
ConvGrads conv2d_pointwise_backward(const Tensor& input, const Tensor& weights,
                                    const Tensor& grad_out);
ConvGrads fully_connected_backward(const Tensor& input, const Tensor& weights,
                                   const Tensor& grad_out);

Tensor avg_pool2d_backward(const std::vector<std::size_t>& input_shape, std::size_t window_h,
                           std::size_t window_w, const Tensor& grad_out);
Tensor global_avg_pool_backward(const std::vector<std::size_t>& input_shape, const Tensor& grad_out);
/// Subgradient 0 at 0.
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

struct SEGrads {
  Tensor input;
  Tensor reduce;
  Tensor expand;
};
SEGrads se_backward(const Tensor& input, const Tensor& reduce, const Tensor& expand,
                    const Tensor& squeeze, const Tensor& hidden_pre, const Tensor& gates,
                    const Tensor& grad_out);

/// -log softmax(logits)[label], computed as logsumexp - logit.
double cross_entropy(const Tensor& logits, int label);
/// Loss and d loss / d logits = softmax(logits) - onehot(label).
std::pair<double, Tensor> softmax_cross_entropy(const Tensor& logits, int label);

// ---------------------------------------------------------------- network gradients

/// One tensor per model layer; empty for weightless layers.
struct Gradients {
  std::vector<Tensor> layers;

  static Gradients zeros_like(const ModelParams& params);
  void add(const Gradients& other);
  void scale(double factor);
};

/// Backpropagates `grad_logits` through a recorded forward pass, adding
/// weight gradients into `grads`. Returns d/d input.
Tensor backward(const ModelParams& params, const ForwardTrace& trace, const Tensor& grad_logits,
                Gradients& grads);

/// Cross-entropy loss of one example; its gradient is added into `grads`.
double loss_and_gradient(const ModelParams& params, const Tensor& features, int label,
                         Gradients& grads);

// ---------------------------------------------------------------- data

/// Labeled examples for training and evaluation.
class ExampleSource {
 public:
  virtual ~ExampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual int label(std::size_t index) const = 0;
  /// Features as seen during training in `epoch` (possibly augmented).
  virtual Tensor train_features(std::size_t index, std::uint64_t epoch) const = 0;
  /// Clean features for evaluation.
  virtual Tensor eval_features(std::size_t index) const = 0;
};

/// Precomputed features, no augmentation.
class TensorExamples final : public ExampleSource {
 public:
  TensorExamples() = default;
  TensorExamples(std::vector<Tensor> features, std::vector<int> labels);

  void add(Tensor features, int label);
  std::size_t size() const override { return features_.size(); }
  int label(std::size_t index) const override { return labels_[index]; }
  Tensor train_features(std::size_t index, std::uint64_t) const override { return features_[index]; }
  Tensor eval_features(std::size_t index) const override { return features_[index]; }

 private:
  std::vector<Tensor> features_;
  std::vector<int> labels_;
};

// ---------------------------------------------------------------- optimization

struct TrainConfig {
  std::size_t batch_size = 100;
  std::uint64_t total_steps = 30000;
  double momentum = 0.9;
  double weight_decay = 1e-3;
  double lr_initial = 0.1;
  double lr_decay = 0.1;
  std::uint64_t lr_decay_every = 10000;
  std::uint64_t eval_every = 1000;
  std::uint64_t seed = 0;
  /// Stop once validation accuracy reaches this value (used for sanity runs).
  std::optional<double> stop_at_accuracy;
  /// Worker threads for per-example gradients; 0 = hardware concurrency.
  /// Results do not depend on this value.
  std::size_t threads = 0;

  void validate() const;
};

/// lr_initial * lr_decay^floor(step / lr_decay_every).
double lr_at(std::uint64_t step, const TrainConfig& config = {});

/// SGD with momentum and coupled L2 decay:
///   v <- momentum * v - lr * (g + weight_decay * w);  w <- w + v.
class SgdMomentum {
 public:
  SgdMomentum(const ModelParams& params, double momentum, double weight_decay);
  void step(ModelParams& params, const Gradients& grads, double lr);

 private:
  double momentum_;
  double weight_decay_;
  std::vector<Tensor> velocity_;
};

struct EvalResult {
  double error_rate = 0.0;
  std::size_t n_examples = 0;
  std::size_t n_errors = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]

  double accuracy() const noexcept { return 1.0 - error_rate; }
};

/// Argmax classification over every example. Throws ConfigError if empty.
EvalResult evaluate(const ModelParams& params, const ExampleSource& examples);

struct ConfidenceInterval {
  double mean = 0.0;
  double half_width = 0.0;
};

/// Mean and 1.96 * sample standard deviation / sqrt(n). Needs n >= 2.
ConfidenceInterval confidence_interval(const std::vector<double>& values);

struct LogEntry {
  std::uint64_t step = 0;
  double lr = 0.0;
  double train_loss = 0.0;  // mean over steps since the previous entry
  double val_error = 0.0;
};

struct TrainResult {
  ModelParams best;
  std::uint64_t best_step = 0;
  double best_val_accuracy = -1.0;
  ModelParams final_params;
  std::uint64_t steps_run = 0;
  std::vector<LogEntry> log;
};

/// Trains from `initial` and keeps the checkpoint with the highest
/// validation accuracy (earliest on ties). Throws TrainingError naming the
/// step on a non-finite loss.
TrainResult train(ModelParams initial, const ExampleSource& train_set,
                  const ExampleSource& validation_set, const TrainConfig& config,
                  const std::function<void(const LogEntry&)>& on_eval = {});

/// Builds `spec` with config.seed and trains it.
TrainResult train(const ArchitectureSpec& spec, const ExampleSource& train_set,
                  const ExampleSource& validation_set, const TrainConfig& config,
                  const std::function<void(const LogEntry&)>& on_eval = {});

// ---------------------------------------------------------------- gradient check

struct TensorCheck {
  std::string name;
  std::size_t checked = 0;
  std::size_t total = 0;
  /// max |analytic - numeric| / max(|analytic|, |numeric|) over the tensor.
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  /// Entries whose +h or -h probe flipped a rectifier; these use the
  /// one-sided difference on the side that did not.
  std::size_t kinks = 0;
  /// Entries where both probes flipped one; the central difference is kept.
  std::size_t unresolved_kinks = 0;
};

struct GradCheckOptions {
  double step = 1e-5;
  /// Entries checked per tensor, chosen at random; 0 checks every entry.
  std::size_t max_entries_per_tensor = 0;
  std::uint64_t seed = 0;
};

/// Central finite differences of the cross-entropy loss against backward().
/// An entry whose probe on one side flips a rectifier is differenced on the
/// other side only, since the central quotient then straddles a kink.
std::vector<TensorCheck> gradient_check(const ModelParams& params, const Tensor& features, int label,
                                        const GradCheckOptions& options = {});

}  // namespace dsresnet
