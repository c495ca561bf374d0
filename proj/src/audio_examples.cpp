// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsresnet/audio_examples.hpp"

namespace dsresnet {

AudioExamples::AudioExamples(std::vector<ClipRef> clips, const NoiseBank& noise, std::uint64_t seed,
                             bool augment_training, AugmentConfig augment)
    : clips_(std::move(clips)),
      noise_(noise),
      seed_(seed),
      augment_training_(augment_training),
      augment_(augment),
      cache_(clips_.size()) {}

Tensor AudioExamples::train_features(std::size_t index, std::uint64_t epoch) const {
  if (!augment_training_) return eval_features(index);
  const ClipRef& clip = clips_[index];
  const Utterance u = materialize(clip, noise_);
  const std::string key = clip.path.empty() ? "silence#" + std::to_string(index) : clip.path;
  return mfcc(augment(u.samples, augment_seed(seed_, key, epoch), noise_, augment_));
}

Tensor AudioExamples::eval_features(std::size_t index) const {
  std::vector<float> stored;
  {
    std::lock_guard lock(cache_mutex_);
    stored = cache_[index];
  }
  if (stored.empty()) {
    const Tensor features = mfcc(materialize(clips_[index], noise_).samples);
    stored.assign(features.values().begin(), features.values().end());
    std::lock_guard lock(cache_mutex_);
    cache_[index] = stored;
  }
  // Served from single precision every time, so repeated evaluations agree.
  const std::size_t coeffs = MfccConfig{}.num_coeffs;
  return Tensor({1, stored.size() / coeffs, coeffs}, std::vector<double>(stored.begin(), stored.end()));
}

}  // namespace dsresnet
