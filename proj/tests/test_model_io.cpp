// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dsresnet/errors.hpp"
#include "dsresnet/model_io.hpp"

namespace dsresnet {
namespace {

ModelParams float_exact(ModelParams p) {
  for (auto& l : p.layers) {
    for (double& v : l.weights.values()) v = static_cast<double>(static_cast<float>(v));
  }
  return p;
}

std::string serialize(const ModelParams& p, std::optional<std::uint64_t> step = std::nullopt) {
  std::ostringstream out;
  write_model(out, p, step);
  return out.str();
}

std::string expect_config_error(const std::string& text) {
  try {
    parse_architecture(text, "arch.txt");
  } catch (const ConfigError& e) {
    return e.what();
  }
  ADD_FAILURE() << "no ConfigError for:\n" << text;
  return {};
}

TEST(ModelFile, RoundTripPreservesStructureAndWeights) {
  for (const auto& name : preset_names()) {
    const ModelParams p = float_exact(build(preset(name), 12));
    std::istringstream in(serialize(p, 4000));
    const Checkpoint c = read_model(in);
    EXPECT_EQ(c.params, p) << name;
    EXPECT_EQ(c.params.arch_name, name);
    ASSERT_TRUE(c.step.has_value());
    EXPECT_EQ(*c.step, 4000u);
  }
}

TEST(ModelFile, StepTrailerIsOptional) {
  const ModelParams p = float_exact(build(preset("DS-ResNet10"), 1));
  std::istringstream in(serialize(p));
  EXPECT_FALSE(read_model(in).step.has_value());
}

TEST(ModelFile, ReserializationIsByteIdentical) {
  const std::string bytes = serialize(build(preset("DS-ResNet14"), 2), 7);
  std::istringstream in(bytes);
  const Checkpoint c = read_model(in);
  EXPECT_EQ(serialize(c.params, c.step), bytes);
}

TEST(ModelFile, MagicAndVersionAreChecked) {
  std::string bytes = serialize(build(preset("DS-ResNet10"), 1));
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::istringstream a(bad_magic);
  EXPECT_THROW(read_model(a), FormatError);
  std::string bad_version = bytes;
  bad_version[4] = 99;
  std::istringstream b(bad_version);
  EXPECT_THROW(read_model(b), FormatError);
}

TEST(ModelFile, TruncationAtAnyPointIsAFormatError) {
  const std::string bytes = serialize(build(preset("DS-ResNet10"), 1));
  for (std::size_t cut : {std::size_t{3}, std::size_t{9}, std::size_t{30}, bytes.size() / 2, bytes.size() - 1}) {
    std::istringstream in(bytes.substr(0, cut));
    EXPECT_THROW(read_model(in), FormatError) << "cut at " << cut;
  }
}

TEST(ModelFile, UnknownKindTagIsRejected) {
  std::string bytes = serialize(build(preset("DS-ResNet10"), 1));
  // magic(4) version(4) name length(4) name(11) layer count(4), then the first tag.
  const std::size_t tag_at = 4 + 4 + 4 + std::string("DS-ResNet10").size() + 4;
  bytes[tag_at] = 77;
  std::istringstream in(bytes);
  EXPECT_THROW(read_model(in), FormatError);
}

TEST(ModelFile, LoadFromMissingPathFails) {
  EXPECT_THROW(load_model("/nonexistent/model.dsrn"), Error);
}

TEST(ModelFile, SaveAndLoadThroughFilesystem) {
  const auto path = std::filesystem::temp_directory_path() / "dsresnet_model_io_test.dsrn";
  const ModelParams p = float_exact(build(preset("DS-ResNet10"), 3));
  save_model(path, p, 11);
  const Checkpoint c = load_model(path);
  EXPECT_EQ(c.params, p);
  EXPECT_EQ(c.step, 11u);
  std::filesystem::remove(path);
}

TEST(ArchitectureText, FormatParseRoundTrip) {
  for (const auto& name : {"DS-ResNet18", "DS-ResNet14", "DS-ResNet10"}) {
    const ArchitectureSpec spec = preset(name);
    const ArchitectureSpec back = parse_architecture(format_architecture(spec), "x");
    EXPECT_EQ(back.name, name);
    EXPECT_EQ(build(back, 5), build(spec, 5)) << name;
  }
}

TEST(ArchitectureText, WhitespaceFormCommentsAndDefaults) {
  const ArchitectureSpec s = parse_architecture(
      "# tiny\n"
      "name tiny\n"
      "conv 3 3 8\n"
      "ds_conv 3 3 8 auto auto 2   # scheduled dilation\n"
      "\n"
      "global_avg_pool\n"
      "softmax 0 0 12\n",
      "tiny.txt");
  EXPECT_EQ(s.name, "tiny");
  ASSERT_EQ(s.layers.size(), 4u);
  EXPECT_EQ(s.layers[1].repeat, 2);
  EXPECT_EQ(s.layers[1].d_h, 0);
  EXPECT_EQ(build(s, 0).total_count(), 8u * 9 + 2 * (8 * 9 + 64) + 12 * 8);
}

TEST(ArchitectureText, ErrorsCarryLineNumbers) {
  EXPECT_NE(expect_config_error("conv, 3, 3, 8\nfrobnicate, 1\n").find("arch.txt:2"), std::string::npos);
  EXPECT_NE(expect_config_error("conv, 3, x, 8\n").find("arch.txt:1"), std::string::npos);
  EXPECT_NE(expect_config_error("conv,3,3,8\n\n\nds_conv,3,3,8,1,1,1,9\n").find("arch.txt:4"),
            std::string::npos);
  EXPECT_NE(expect_config_error("conv, 3, 3, 8\nds_conv, 3, 3, 8, 1, 1, 0\n").find("arch.txt:2"),
            std::string::npos);
}

TEST(ArchitectureText, StructuralErrorsAreConfigErrors) {
  expect_config_error("conv, 3, 3, 8\nds_conv, 3, 3, 8\n");
  expect_config_error("conv, 3, 3, 8\nglobal_avg_pool\nsoftmax,0,0,12\nconv,3,3,8\n");
}

TEST(ArchitectureText, ResolvePresetOrFile) {
  EXPECT_EQ(resolve_architecture("DS-ResNet10").name, "DS-ResNet10");
  EXPECT_THROW(resolve_architecture("missing.spec"), ConfigError);
  const auto path = std::filesystem::temp_directory_path() / "dsresnet_arch_test.txt";
  {
    std::ofstream out(path);
    out << format_architecture(preset("DS-ResNet14"));
  }
  EXPECT_EQ(build(resolve_architecture(path.string()), 1), build(preset("DS-ResNet14"), 1));
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace dsresnet
