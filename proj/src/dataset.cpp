// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "dsresnet/audio.hpp"
#include "dsresnet/binary_io.hpp"
#include "dsresnet/errors.hpp"
#include "dsresnet/random.hpp"

namespace dsresnet {
namespace {

namespace fs = std::filesystem;

constexpr std::uint32_t kMaxWavsPerClass = (1u << 27) - 1;
constexpr char kCacheMagic[4] = {'D', 'S', 'F', 'C'};
constexpr std::size_t kCacheFrames = 101;
constexpr std::size_t kCacheCoeffs = 40;

std::array<unsigned char, 20> sha1(std::string_view text) {
  std::array<unsigned char, 20> digest{};
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest.data(), &len, EVP_sha1(), nullptr) != 1 ||
      len != digest.size()) {
    throw Error("SHA-1 digest failed");
  }
  return digest;
}

std::vector<fs::path> sorted_wavs(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::set<std::string> read_list(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("missing list file '" + file.string() + "'");
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) out.insert(line);
  }
  return out;
}

}  // namespace

const char* to_string(Split split) noexcept {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "?";
}

std::string split_key(std::string_view filename) {
  const auto slash = filename.find_last_of("/\\");
  std::string_view base = slash == std::string_view::npos ? filename : filename.substr(slash + 1);
  const auto marker = base.find("_nohash_");
  if (marker != std::string_view::npos) base = base.substr(0, marker);
  return std::string(base);
}

double split_percentage(std::string_view filename) {
  const auto digest = sha1(split_key(filename));
  // The digest read as a big-endian integer, modulo 2^27: its low 27 bits.
  std::uint32_t tail = 0;
  for (std::size_t i = 16; i < 20; ++i) tail = (tail << 8) | digest[i];
  const std::uint32_t bucket = tail & kMaxWavsPerClass;
  return static_cast<double>(bucket) * (100.0 / static_cast<double>(kMaxWavsPerClass));
}

Split assign_split(std::string_view filename, double validation_pct, double test_pct) {
  const double pct = split_percentage(filename);
  if (pct < validation_pct) return Split::kValidation;
  if (pct < validation_pct + test_pct) return Split::kTest;
  return Split::kTrain;
}

NoiseBank NoiseBank::load(const fs::path& directory) {
  NoiseBank bank;
  if (!fs::is_directory(directory)) return bank;
  for (const fs::path& wav : sorted_wavs(directory)) {
    WavData data = read_wav(wav);
    if (data.sample_rate != kSampleRate) {
      throw IngestionError(wav.string() + ": noise file must be 16 kHz");
    }
    bank.paths.push_back(wav.string());
    bank.clips.push_back(std::move(data.samples));
  }
  return bank;
}

std::vector<double> NoiseBank::crop(int index, std::size_t offset, double gain,
                                    std::size_t length) const {
  if (index < 0 || static_cast<std::size_t>(index) >= clips.size()) {
    throw ConfigError("noise index " + std::to_string(index) + " out of range");
  }
  const auto& clip = clips[index];
  std::vector<double> out(length, 0.0);
  for (std::size_t i = 0; i < length && offset + i < clip.size(); ++i) {
    out[i] = clip[offset + i] * gain;
  }
  return out;
}

Utterance materialize(const ClipRef& clip, const NoiseBank& noise) {
  Utterance u;
  u.label = clip.label;
  u.path = clip.path;
  u.split = clip.split;
  if (clip.is_silence()) {
    u.samples = noise.crop(clip.noise_index, clip.noise_offset, clip.noise_gain);
    if (u.path.empty()) {
      u.path = "silence:" + std::to_string(clip.noise_index) + ":" +
               std::to_string(clip.noise_offset);
    }
  } else {
    u.samples = load_wav(clip.path);
  }
  return u;
}

std::vector<ClipRef> balance_dataset(const std::vector<ClipRef>& keywords,
                                     const std::vector<ClipRef>& unknown_pool,
                                     const NoiseBank& noise, Split split, std::uint64_t seed,
                                     BalanceConfig config) {
  if (noise.empty()) throw ConfigError("balance_dataset: no background-noise recordings");
  if (unknown_pool.empty()) throw ConfigError("balance_dataset: empty unknown pool");
  const double keyword_share = 1.0 - config.silence_fraction - config.unknown_fraction;
  if (!(keyword_share > 0.0) || config.silence_fraction < 0.0 || config.unknown_fraction < 0.0) {
    throw ConfigError("balance_dataset: fractions must be non-negative and sum below 1");
  }
  // total = keywords / keyword_share; each extra class is its fraction of total.
  const double total = static_cast<double>(keywords.size()) / keyword_share;
  const auto n_unknown = std::min<std::size_t>(
      unknown_pool.size(), static_cast<std::size_t>(std::llround(total * config.unknown_fraction)));
  const auto n_silence = static_cast<std::size_t>(std::llround(total * config.silence_fraction));

  std::vector<ClipRef> out = keywords;
  Rng unknown_rng(derive_seed(seed, "balance.unknown"));
  std::vector<std::size_t> order(unknown_pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  unknown_rng.shuffle(order.begin(), order.end());
  std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_unknown));
  std::sort(chosen.begin(), chosen.end());
  for (std::size_t i : chosen) {
    ClipRef clip = unknown_pool[i];
    clip.label = kUnknownLabel;
    clip.split = split;
    out.push_back(std::move(clip));
  }

  Rng silence_rng(derive_seed(seed, "balance.silence"));
  for (std::size_t i = 0; i < n_silence; ++i) {
    ClipRef clip;
    clip.label = kSilenceLabel;
    clip.split = split;
    clip.noise_index = static_cast<int>(silence_rng.below(noise.clips.size()));
    const std::size_t len = noise.clips[clip.noise_index].size();
    clip.noise_offset = len > kClipSamples ? silence_rng.below(len - kClipSamples + 1) : 0;
    clip.noise_gain = silence_rng.uniform();
    out.push_back(std::move(clip));
  }
  return out;
}

const std::vector<ClipRef>& DatasetSplits::get(Split split) const {
  switch (split) {
    case Split::kTrain: return train;
    case Split::kValidation: return validation;
    case Split::kTest: return test;
  }
  return train;
}

DatasetSplits load_speech_commands(const fs::path& root, int experiment, std::uint64_t seed) {
  if (experiment != 1 && experiment != 2) {
    throw ConfigError("experiment must be 1 or 2, got " + std::to_string(experiment));
  }
  if (!fs::is_directory(root)) throw ConfigError("dataset directory '" + root.string() + "' not found");
  DatasetSplits splits;
  splits.noise = NoiseBank::load(root / "_background_noise_");

  std::vector<std::string> words;
  for (const auto& entry : fs::directory_iterator(root)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_directory() && !name.empty() && name[0] != '_' && name[0] != '.') {
      words.push_back(name);
    }
  }
  std::sort(words.begin(), words.end());
  if (words.empty()) throw ConfigError("dataset directory '" + root.string() + "' has no word folders");

  std::set<std::string> validation_list, testing_list;
  if (experiment == 2) {
    validation_list = read_list(root / "validation_list.txt");
    testing_list = read_list(root / "testing_list.txt");
  }

  // Per split: keyword clips and the unknown pool (experiment 1 only).
  std::vector<ClipRef> keywords[3], unknown[3];
  for (const std::string& word : words) {
    const int label = label_for_word(word);
    for (const fs::path& wav : sorted_wavs(root / word)) {
      ClipRef clip;
      clip.path = wav.string();
      clip.label = label;
      if (experiment == 1) {
        clip.split = assign_split(wav.filename().string());
      } else {
        const std::string rel = word + "/" + wav.filename().string();
        clip.split = validation_list.count(rel)   ? Split::kValidation
                     : testing_list.count(rel)    ? Split::kTest
                                                  : Split::kTrain;
      }
      const auto s = static_cast<std::size_t>(clip.split);
      (label == kUnknownLabel ? unknown[s] : keywords[s]).push_back(std::move(clip));
    }
  }

  for (Split split : {Split::kTrain, Split::kValidation, Split::kTest}) {
    const auto s = static_cast<std::size_t>(split);
    std::vector<ClipRef>& target = split == Split::kTrain        ? splits.train
                                   : split == Split::kValidation ? splits.validation
                                                                 : splits.test;
    if (experiment == 1) {
      target = balance_dataset(keywords[s], unknown[s], splits.noise, split,
                               derive_seed(seed, "balance", s));
    } else {
      target = keywords[s];
      target.insert(target.end(), unknown[s].begin(), unknown[s].end());
    }
  }
  return splits;
}

std::vector<double> time_shift(std::span<const double> samples, std::int64_t offset) {
  const auto n = static_cast<std::int64_t>(samples.size());
  std::vector<double> out(samples.size(), 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t j = i + offset;
    if (j >= 0 && j < n) out[static_cast<std::size_t>(j)] = samples[static_cast<std::size_t>(i)];
  }
  return out;
}

std::vector<double> augment(std::span<const double> samples, std::uint64_t seed,
                            const NoiseBank& noise, const AugmentConfig& config) {
  Rng rng(seed);
  const auto max_shift =
      static_cast<std::int64_t>(std::llround(config.max_shift_ms * kSampleRate / 1000.0));
  std::vector<double> out = time_shift(samples, rng.between(-max_shift, max_shift));
  const double draw = rng.uniform();
  if (draw < config.noise_probability && !noise.empty()) {
    const auto index = static_cast<int>(rng.below(noise.clips.size()));
    const std::size_t len = noise.clips[index].size();
    const std::size_t offset = len > out.size() ? rng.below(len - out.size() + 1) : 0;
    const double gain = rng.uniform(0.0, config.max_noise_scale);
    const std::vector<double> crop = noise.crop(index, offset, gain, out.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += crop[i];
  }
  for (double& v : out) v = std::clamp(v, -1.0, 1.0);
  return out;
}

std::uint64_t augment_seed(std::uint64_t seed, std::string_view path, std::uint64_t epoch) {
  return derive_seed(derive_seed(seed, "augment") ^ hash64(path), "epoch", epoch);
}

void write_feature_cache(const fs::path& path, const std::vector<FeatureRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  out.write(kCacheMagic, 4);
  write_u32(out, kFeatureCacheVersion);
  write_u32(out, static_cast<std::uint32_t>(records.size()));
  for (const FeatureRecord& r : records) {
    if (r.features.size() != kCacheFrames * kCacheCoeffs) {
      throw DimensionError("feature cache: record '" + r.path + "' has shape " +
                           r.features.shape_string() + ", expected [1x101x40]");
    }
    write_string(out, r.path);
    write_u8(out, r.label);
    for (double v : r.features.values()) write_f32(out, static_cast<float>(v));
  }
  if (!out) throw FormatError("feature cache: write failed");
}

std::vector<FeatureRecord> read_feature_cache(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open feature cache '" + path.string() + "'");
  char magic[4];
  read_exact(in, magic, 4, "feature cache magic");
  if (!std::equal(magic, magic + 4, kCacheMagic)) throw FormatError("feature cache: bad magic");
  const std::uint32_t version = read_u32(in, "feature cache version");
  if (version != kFeatureCacheVersion) {
    throw FormatError("feature cache: unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = read_u32(in, "feature cache count");
  std::vector<FeatureRecord> records;
  records.reserve(std::min<std::uint32_t>(count, 1u << 20));
  for (std::uint32_t i = 0; i < count; ++i) {
    FeatureRecord r;
    r.path = read_string(in, "feature cache path");
    r.label = read_u8(in, "feature cache label");
    std::vector<double> values(kCacheFrames * kCacheCoeffs);
    for (double& v : values) v = read_f32(in, "feature cache values");
    r.features = Tensor({1, kCacheFrames, kCacheCoeffs}, std::move(values));
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace dsresnet
