// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0
//
// Model files ("DSRN", little-endian):
//
//   char[4]  magic "DSRN"
//   u32      format version (1)
//   u32      architecture name length, then that many UTF-8 bytes
//   u32      layer count
//   per layer:
//     u32    kind tag (OpKind)
//     i32 x5 m, r, n, d_w, d_h
//     u32    tensor rank, then rank x u32 dims
//     f32    weights, row-major
//   optional trailer: char[4] "STEP", u64 training step of the checkpoint
//
// Architecture text files hold one layer per line:
//
//   kind, m, r, n, d_w, d_h, repeat
//
// with kind one of conv, se, avg_pool, res, ds_conv, global_avg_pool,
// softmax. Dilation 0 (or "auto") follows the 2^floor(i/3) schedule.
// Trailing fields may be omitted. '#' starts a comment; a line
// "name <text>" sets the architecture name.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "dsresnet/model_zoo.hpp"

namespace dsresnet {

inline constexpr std::uint32_t kModelFormatVersion = 1;

struct Checkpoint {
  ModelParams params;
  std::optional<std::uint64_t> step;
};

void write_model(std::ostream& out, const ModelParams& params,
                 std::optional<std::uint64_t> step = std::nullopt);
Checkpoint read_model(std::istream& in);

void save_model(const std::filesystem::path& path, const ModelParams& params,
                std::optional<std::uint64_t> step = std::nullopt);
Checkpoint load_model(const std::filesystem::path& path);

/// Parses architecture text; errors carry "<source>:<line>:".
ArchitectureSpec parse_architecture(const std::string& text,
                                    const std::string& source = "<text>");
ArchitectureSpec load_architecture_file(const std::filesystem::path& path);
std::string format_architecture(const ArchitectureSpec& spec);

/// Preset name, or else a path to an architecture text file.
ArchitectureSpec resolve_architecture(const std::string& preset_or_path);

}  // namespace dsresnet
