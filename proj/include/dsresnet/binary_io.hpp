// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0
//
// Little-endian scalar I/O shared by the model and feature-cache formats.

#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "dsresnet/errors.hpp"

namespace dsresnet {

inline void write_le(std::ostream& out, std::uint64_t v, int bytes) {
  char buf[8];
  for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, bytes);
}

inline void write_u8(std::ostream& out, std::uint8_t v) { write_le(out, v, 1); }
inline void write_u32(std::ostream& out, std::uint32_t v) { write_le(out, v, 4); }
inline void write_i32(std::ostream& out, std::int32_t v) {
  write_le(out, static_cast<std::uint32_t>(v), 4);
}
inline void write_u64(std::ostream& out, std::uint64_t v) { write_le(out, v, 8); }
inline void write_f32(std::ostream& out, float v) { write_u32(out, std::bit_cast<std::uint32_t>(v)); }

inline void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void read_exact(std::istream& in, char* dst, std::size_t n, const char* what) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw FormatError(std::string("truncated file while reading ") + what);
  }
}

inline std::uint64_t read_le(std::istream& in, int bytes, const char* what) {
  unsigned char buf[8];
  read_exact(in, reinterpret_cast<char*>(buf), bytes, what);
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

inline std::uint8_t read_u8(std::istream& in, const char* what) {
  return static_cast<std::uint8_t>(read_le(in, 1, what));
}
inline std::uint32_t read_u32(std::istream& in, const char* what) {
  return static_cast<std::uint32_t>(read_le(in, 4, what));
}
inline std::int32_t read_i32(std::istream& in, const char* what) {
  return static_cast<std::int32_t>(read_u32(in, what));
}
inline std::uint64_t read_u64(std::istream& in, const char* what) { return read_le(in, 8, what); }
inline float read_f32(std::istream& in, const char* what) {
  return std::bit_cast<float>(read_u32(in, what));
}

inline std::string read_string(std::istream& in, const char* what, std::uint32_t max_len = 1u << 20) {
  const std::uint32_t len = read_u32(in, what);
  if (len > max_len) throw FormatError(std::string("implausible string length in ") + what);
  std::string s(len, '\0');
  read_exact(in, s.data(), len, what);
  return s;
}

}  // namespace dsresnet
