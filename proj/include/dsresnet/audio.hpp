// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0
//
// Audio front end: WAV ingestion, MFCC features, Speech Commands dataset
// organization (hash splits, silence/unknown balancing) and training-time
// augmentation.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dsresnet/tensor.hpp"

namespace dsresnet {

inline constexpr int kSampleRate = 16000;
inline constexpr std::size_t kClipSamples = 16000;

// ---------------------------------------------------------------- labels

inline constexpr std::size_t kNumClasses = 12;
inline constexpr std::array<std::string_view, 10> kKeywords = {
    "yes", "no", "up", "down", "left", "right", "on", "off", "stop", "go"};
inline constexpr int kUnknownLabel = 10;
inline constexpr int kSilenceLabel = 11;

/// "yes".."go", "unknown", "silence".
std::string_view label_name(int label);
/// Keyword index for keyword words, kUnknownLabel for any other word.
int label_for_word(std::string_view word);

// ---------------------------------------------------------------- WAV

struct WavData {
  int sample_rate = 0;
  std::vector<double> samples;  // normalized to [-1, 1)
};

/// RIFF/WAVE, 16-bit PCM, mono. Throws IngestionError otherwise.
WavData read_wav(const std::filesystem::path& path);
WavData parse_wav(std::span<const std::uint8_t> bytes, const std::string& source = "<memory>");

/// Writes 16-bit PCM mono; samples are clipped to [-1, 1] and rounded.
void write_wav(const std::filesystem::path& path, std::span<const double> samples,
               int sample_rate = kSampleRate);

/// Zero-pads at the end or crops centrally to exactly `length` samples.
std::vector<double> fit_to_length(std::vector<double> samples, std::size_t length = kClipSamples);

/// read_wav + 16 kHz check + fit_to_length.
std::vector<double> load_wav(const std::filesystem::path& path);

// ---------------------------------------------------------------- MFCC

struct MfccConfig {
  int sample_rate = kSampleRate;
  std::size_t window = 400;  // 25 ms
  std::size_t hop = 160;     // 10 ms
  std::size_t fft_size = 512;
  std::size_t num_filters = 40;
  std::size_t num_coeffs = 40;
  double low_hz = 20.0;
  double high_hz = 8000.0;
  double log_floor = 1e-6;
};

/// Centered framing (reflect padding by half a window), periodic Hann
/// window, magnitude spectrum, triangular HTK-mel filterbank, natural log
/// with a floor, orthonormal DCT-II.
class MfccExtractor {
 public:
  explicit MfccExtractor(MfccConfig config = {});
  ~MfccExtractor();
  MfccExtractor(const MfccExtractor&) = delete;
  MfccExtractor& operator=(const MfccExtractor&) = delete;

  const MfccConfig& config() const noexcept { return config_; }
  /// Frames produced for `samples` input samples: 1 + samples / hop.
  std::size_t frame_count(std::size_t samples) const noexcept;
  /// num_filters x (fft_size/2 + 1) filterbank weights, row-major.
  const std::vector<double>& filterbank() const noexcept { return filterbank_; }

  /// 1 x frames x num_coeffs. Thread-safe.
  Tensor compute(std::span<const double> samples) const;

 private:
  MfccConfig config_;
  std::vector<double> window_;
  std::vector<double> filterbank_;
  std::vector<double> dct_;  // num_coeffs x num_filters
  struct Plan;
  std::unique_ptr<Plan> plan_;
};

double hz_to_mel(double hz) noexcept;
double mel_to_hz(double mel) noexcept;

/// 40-dim MFCC of a 1 s clip: 1 x 101 x 40. Throws IngestionError unless
/// exactly 16 000 samples are given.
Tensor mfcc(std::span<const double> samples);

// ---------------------------------------------------------------- dataset

enum class Split { kTrain, kValidation, kTest };
const char* to_string(Split split) noexcept;

/// Speaker part of a Speech Commands file name: the basename up to
/// "_nohash_", or the whole basename when the marker is absent.
std::string split_key(std::string_view filename);

/// Bucket in [0, 100) from the SHA-1 of split_key(filename), using the
/// Speech Commands convention (hash mod 2^27, scaled to a percentage).
double split_percentage(std::string_view filename);

/// < validation_pct -> validation, < validation_pct + test_pct -> test,
/// else train.
Split assign_split(std::string_view filename, double validation_pct = 10.0,
                   double test_pct = 10.0);

/// A labeled one-second clip, either a file on disk or a crop of a
/// background-noise recording (silence).
struct ClipRef {
  std::string path;  // empty for generated silence
  int label = 0;
  Split split = Split::kTrain;
  int noise_index = -1;
  std::size_t noise_offset = 0;
  double noise_gain = 0.0;

  bool is_silence() const noexcept { return noise_index >= 0; }
};

struct Utterance {
  std::vector<double> samples;  // exactly 16 000
  int label = 0;
  std::string path;
  Split split = Split::kTrain;
};

/// Background noise recordings, fully loaded.
struct NoiseBank {
  std::vector<std::string> paths;
  std::vector<std::vector<double>> clips;

  bool empty() const noexcept { return clips.empty(); }
  static NoiseBank load(const std::filesystem::path& directory);
  /// `length` samples from clip `index` starting at `offset`, scaled.
  std::vector<double> crop(int index, std::size_t offset, double gain,
                           std::size_t length = kClipSamples) const;
};

/// Loads a file clip or renders a silence clip from the noise bank.
Utterance materialize(const ClipRef& clip, const NoiseBank& noise);

struct BalanceConfig {
  double silence_fraction = 0.1;
  double unknown_fraction = 0.1;
};

/// Returns keywords + a random subset of `unknown_pool` + generated silence
/// clips so that silence and unknown are each about the configured share of
/// the result. Silence clips are random 1 s noise crops scaled by U[0, 1].
/// Throws ConfigError when the noise bank or unknown pool is empty.
std::vector<ClipRef> balance_dataset(const std::vector<ClipRef>& keywords,
                                     const std::vector<ClipRef>& unknown_pool,
                                     const NoiseBank& noise, Split split, std::uint64_t seed,
                                     BalanceConfig config = {});

struct DatasetSplits {
  std::vector<ClipRef> train;
  std::vector<ClipRef> validation;
  std::vector<ClipRef> test;
  NoiseBank noise;

  const std::vector<ClipRef>& get(Split split) const;
};

/// Word-named subdirectories plus "_background_noise_". Experiment 1:
/// hash split and silence/unknown balancing. Experiment 2: the published
/// validation_list.txt / testing_list.txt, everything else is training,
/// no balancing.
DatasetSplits load_speech_commands(const std::filesystem::path& root, int experiment,
                                   std::uint64_t seed);

// ---------------------------------------------------------------- augmentation

struct AugmentConfig {
  double max_shift_ms = 100.0;
  double noise_probability = 0.8;
  double max_noise_scale = 0.1;
};

/// Moves samples by `offset` (positive = later), zero-filling.
std::vector<double> time_shift(std::span<const double> samples, std::int64_t offset);

/// Random shift in [-max_shift, +max_shift], then with probability
/// noise_probability adds a random noise crop scaled by U[0, max_noise_scale],
/// then clips to [-1, 1]. Deterministic in `seed`.
std::vector<double> augment(std::span<const double> samples, std::uint64_t seed,
                            const NoiseBank& noise, const AugmentConfig& config = {});

/// Seed for augmenting one utterance in one epoch.
std::uint64_t augment_seed(std::uint64_t seed, std::string_view path, std::uint64_t epoch);

// ---------------------------------------------------------------- feature cache

// "DSFC" file: magic, u32 version, u32 count, then per record u32 path
// length + bytes, u8 label id, frames x 40 little-endian f32.
inline constexpr std::uint32_t kFeatureCacheVersion = 1;

struct FeatureRecord {
  std::string path;
  std::uint8_t label = 0;
  Tensor features;  // 1 x 101 x 40
};

void write_feature_cache(const std::filesystem::path& path, const std::vector<FeatureRecord>& records);
std::vector<FeatureRecord> read_feature_cache(const std::filesystem::path& path);

}  // namespace dsresnet
