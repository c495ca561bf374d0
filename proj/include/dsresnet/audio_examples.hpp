// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <mutex>
#include <vector>

#include "dsresnet/audio.hpp"
#include "dsresnet/training.hpp"

namespace dsresnet {

/// Clips decoded and featurized on demand. Training features are augmented
/// per epoch when `augment_training` is set; evaluation features are clean
/// and cached after first use.
class AudioExamples final : public ExampleSource {
 public:
  AudioExamples(std::vector<ClipRef> clips, const NoiseBank& noise, std::uint64_t seed,
                bool augment_training, AugmentConfig augment = {});

  std::size_t size() const override { return clips_.size(); }
  int label(std::size_t index) const override { return clips_[index].label; }
  Tensor train_features(std::size_t index, std::uint64_t epoch) const override;
  Tensor eval_features(std::size_t index) const override;

  const std::vector<ClipRef>& clips() const noexcept { return clips_; }

 private:
  std::vector<ClipRef> clips_;
  const NoiseBank& noise_;
  std::uint64_t seed_;
  bool augment_training_;
  AugmentConfig augment_;
  mutable std::mutex cache_mutex_;
  mutable std::vector<std::vector<float>> cache_;
};

}  // namespace dsresnet
