// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsresnet/model_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "dsresnet/binary_io.hpp"
#include "dsresnet/errors.hpp"

namespace dsresnet {
namespace {

constexpr char kMagic[4] = {'D', 'S', 'R', 'N'};
constexpr char kStepTag[4] = {'S', 'T', 'E', 'P'};
// Guards against absurd allocations when reading corrupt files.
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint64_t kMaxElements = 1ULL << 28;

std::string trim(std::string s) {
  auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return s;
}

LayerKind parse_kind(const std::string& word, const std::string& where) {
  const std::string k = lower(word);
  if (k == "conv" || k == "standard_conv") return LayerKind::kStandardConv;
  if (k == "se") return LayerKind::kSE;
  if (k == "avg_pool" || k == "avgpool" || k == "pool") return LayerKind::kAvgPool;
  if (k == "res" || k == "residual" || k == "residual_group") return LayerKind::kResidualGroup;
  if (k == "ds_conv" || k == "ds" || k == "dsconv") return LayerKind::kDSConv;
  if (k == "global_avg_pool" || k == "global_pool" || k == "gap") return LayerKind::kGlobalAvgPool;
  if (k == "softmax" || k == "softmax_fc" || k == "fc") return LayerKind::kSoftmaxFC;
  throw ConfigError(where + ": unknown layer kind '" + word + "'");
}

int parse_int(const std::string& field, const std::string& where, bool dilation) {
  const std::string f = lower(trim(field));
  if (dilation && (f == "auto" || f == "sched" || f == "schedule")) return 0;
  if (f == "-" || f.empty()) return 0;
  try {
    std::size_t used = 0;
    const int v = std::stoi(f, &used);
    if (used != f.size()) throw std::invalid_argument(f);
    if (v < 0) throw ConfigError(where + ": negative value '" + field + "'");
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError(where + ": expected an integer, got '" + field + "'");
  }
}

}  // namespace

void write_model(std::ostream& out, const ModelParams& params, std::optional<std::uint64_t> step) {
  out.write(kMagic, 4);
  write_u32(out, kModelFormatVersion);
  write_string(out, params.arch_name);
  write_u32(out, static_cast<std::uint32_t>(params.layers.size()));
  for (const ModelLayer& layer : params.layers) {
    write_u32(out, static_cast<std::uint32_t>(layer.kind));
    for (int v : {layer.m, layer.r, layer.n, layer.d_w, layer.d_h}) write_i32(out, v);
    const auto& shape = layer.has_weights() ? layer.weights.shape() : std::vector<std::size_t>{};
    write_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) write_u32(out, static_cast<std::uint32_t>(d));
    for (double v : layer.weights.values()) write_f32(out, static_cast<float>(v));
  }
  if (step) {
    out.write(kStepTag, 4);
    write_u64(out, *step);
  }
  if (!out) throw FormatError("model: write failed");
}

Checkpoint read_model(std::istream& in) {
  char magic[4];
  read_exact(in, magic, 4, "model magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("model: bad magic (expected DSRN)");
  const std::uint32_t version = read_u32(in, "model version");
  if (version != kModelFormatVersion) {
    throw FormatError("model: unsupported format version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.params.arch_name = read_string(in, "architecture name");
  const std::uint32_t count = read_u32(in, "layer count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string where = "model layer " + std::to_string(i);
    ModelLayer layer;
    const std::uint32_t tag = read_u32(in, where.c_str());
    if (!is_known_op(tag)) throw FormatError(where + ": unknown kind tag " + std::to_string(tag));
    layer.kind = static_cast<OpKind>(tag);
    layer.name = std::to_string(i) + "." + to_string(layer.kind);
    layer.m = read_i32(in, where.c_str());
    layer.r = read_i32(in, where.c_str());
    layer.n = read_i32(in, where.c_str());
    layer.d_w = read_i32(in, where.c_str());
    layer.d_h = read_i32(in, where.c_str());
    const std::uint32_t rank = read_u32(in, where.c_str());
    if (rank > kMaxRank) throw FormatError(where + ": implausible tensor rank " + std::to_string(rank));
    if (rank > 0) {
      std::vector<std::size_t> shape(rank);
      std::uint64_t elements = 1;
      for (auto& d : shape) {
        d = read_u32(in, where.c_str());
        elements *= d;
        if (d == 0 || elements > kMaxElements) throw FormatError(where + ": implausible tensor dims");
      }
      std::vector<double> data(elements);
      for (double& v : data) v = read_f32(in, where.c_str());
      layer.weights = Tensor(std::move(shape), std::move(data));
    }
    ckpt.params.layers.push_back(std::move(layer));
  }
  char tag[4];
  in.read(tag, 4);
  if (in.gcount() == 4) {
    if (std::memcmp(tag, kStepTag, 4) != 0) throw FormatError("model: unexpected trailing data");
    ckpt.step = read_u64(in, "checkpoint step");
  }
  ckpt.params.validate();
  return ckpt;
}

void save_model(const std::filesystem::path& path, const ModelParams& params,
                std::optional<std::uint64_t> step) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  write_model(out, params, step);
}

Checkpoint load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open model file '" + path.string() + "'");
  return read_model(in);
}

ArchitectureSpec parse_architecture(const std::string& text, const std::string& source) {
  ArchitectureSpec spec;
  spec.name = source;
  std::istringstream lines(text);
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no);
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (lower(line.substr(0, 5)) == "name " || lower(line.substr(0, 5)) == "name:") {
      spec.name = trim(line.substr(5));
      continue;
    }
    std::vector<std::string> fields;
    std::string field;
    std::istringstream split(line);
    while (std::getline(split, field, ',')) fields.push_back(trim(field));
    if (fields.size() == 1) {
      // Whitespace-separated form.
      fields.clear();
      std::istringstream ws(line);
      while (ws >> field) fields.push_back(field);
    }
    if (fields.size() > 7) throw ConfigError(where + ": expected at most 7 fields, got " +
                                             std::to_string(fields.size()));
    LayerConfig layer;
    layer.kind = parse_kind(fields[0], where);
    int values[6] = {0, 0, 0, 0, 0, 1};
    for (std::size_t i = 1; i < fields.size(); ++i) {
      values[i - 1] = parse_int(fields[i], where, i == 4 || i == 5);
    }
    layer.m = values[0];
    layer.r = values[1];
    layer.n = values[2];
    layer.d_w = values[3];
    layer.d_h = values[4];
    layer.repeat = values[5];
    if (layer.kind == LayerKind::kStandardConv) {
      layer.d_w = std::max(layer.d_w, 1);
      layer.d_h = std::max(layer.d_h, 1);
    }
    if (layer.repeat < 1) throw ConfigError(where + ": repeat count must be >= 1");
    if (layer.kind == LayerKind::kSoftmaxFC) spec.num_classes = layer.n;
    spec.layers.push_back(layer);
  }
  try {
    spec.validate();
  } catch (const Error& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return spec;
}

ArchitectureSpec load_architecture_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open architecture file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_architecture(text.str(), path.string());
}

std::string format_architecture(const ArchitectureSpec& spec) {
  std::ostringstream out;
  out << "name " << spec.name << "\n";
  out << "# kind, m, r, n, d_w, d_h, repeat\n";
  for (const LayerConfig& l : spec.layers) {
    out << to_string(l.kind) << ", " << l.m << ", " << l.r << ", " << l.n << ", " << l.d_w << ", "
        << l.d_h << ", " << l.repeat << "\n";
  }
  return out.str();
}

ArchitectureSpec resolve_architecture(const std::string& preset_or_path) {
  const auto names = preset_names();
  if (std::find(names.begin(), names.end(), preset_or_path) != names.end()) {
    return preset(preset_or_path);
  }
  if (!std::filesystem::exists(preset_or_path)) {
    std::string known;
    for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("'" + preset_or_path + "' is neither a preset (" + known +
                      ") nor an existing architecture file");
  }
  return load_architecture_file(preset_or_path);
}

}  // namespace dsresnet
