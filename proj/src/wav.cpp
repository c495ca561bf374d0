// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dsresnet/audio.hpp"
#include "dsresnet/errors.hpp"

namespace dsresnet {
namespace {

std::uint32_t le32(const std::uint8_t* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t le16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

void put32(std::vector<char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put16(std::vector<char>& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

std::string_view label_name(int label) {
  if (label >= 0 && label < static_cast<int>(kKeywords.size())) return kKeywords[label];
  if (label == kUnknownLabel) return "unknown";
  if (label == kSilenceLabel) return "silence";
  return "?";
}

int label_for_word(std::string_view word) {
  for (std::size_t i = 0; i < kKeywords.size(); ++i) {
    if (kKeywords[i] == word) return static_cast<int>(i);
  }
  return kUnknownLabel;
}

WavData parse_wav(std::span<const std::uint8_t> bytes, const std::string& source) {
  auto fail = [&](const std::string& why) { throw IngestionError(source + ": " + why); };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    fail("not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size() && std::memcmp(chunk, "data", 4) != 0) {
      fail("truncated chunk");
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) fail("fmt chunk too short");
      format = le16(bytes.data() + body);
      channels = le16(bytes.data() + body + 2);
      rate = le32(bytes.data() + body + 4);
      bits = le16(bytes.data() + body + 14);
      // WAVE_FORMAT_EXTENSIBLE carries the real format in its sub-format GUID.
      if (format == 0xFFFE && size >= 26) format = le16(bytes.data() + body + 24);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) fail("data chunk before fmt chunk");
      if (format != 1) fail("unsupported encoding (format tag " + std::to_string(format) + ", need PCM)");
      if (channels != 1) fail("unsupported channel count " + std::to_string(channels) + " (need mono)");
      if (bits != 16) fail("unsupported sample width " + std::to_string(bits) + " bits (need 16)");
      // Some writers leave the data size unset; take what is there.
      const std::size_t available = std::min<std::size_t>(size, bytes.size() - body);
      WavData wav;
      wav.sample_rate = static_cast<int>(rate);
      wav.samples.resize(available / 2);
      for (std::size_t i = 0; i < wav.samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(le16(bytes.data() + body + 2 * i));
        wav.samples[i] = static_cast<double>(v) / 32768.0;
      }
      return wav;
    }
    pos = body + size + (size & 1);
  }
  fail(have_fmt ? "missing data chunk" : "missing fmt chunk");
  return {};
}

WavData read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(path.string() + ": cannot open file");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_wav(bytes, path.string());
}

void write_wav(const std::filesystem::path& path, std::span<const double> samples, int sample_rate) {
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  std::vector<char> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(sample_rate));
  put32(out, static_cast<std::uint32_t>(sample_rate) * 2);
  put16(out, 2);
  put16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put32(out, data_bytes);
  for (double s : samples) {
    const double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0))));
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IngestionError(path.string() + ": cannot open for writing");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
}

std::vector<double> fit_to_length(std::vector<double> samples, std::size_t length) {
  if (samples.size() > length) {
    const std::size_t start = (samples.size() - length) / 2;
    return std::vector<double>(samples.begin() + static_cast<std::ptrdiff_t>(start),
                               samples.begin() + static_cast<std::ptrdiff_t>(start + length));
  }
  samples.resize(length, 0.0);
  return samples;
}

std::vector<double> load_wav(const std::filesystem::path& path) {
  WavData wav = read_wav(path);
  if (wav.sample_rate != kSampleRate) {
    throw IngestionError(path.string() + ": unsupported sample rate " +
                         std::to_string(wav.sample_rate) + " Hz (need 16000)");
  }
  return fit_to_length(std::move(wav.samples));
}

}  // namespace dsresnet
