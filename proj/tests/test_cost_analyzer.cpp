// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <sstream>

#include "dsresnet/cost_analyzer.hpp"
#include "dsresnet/errors.hpp"

namespace dsresnet {
namespace {

TEST(LayerCosts, WorkedExamples) {
  EXPECT_EQ(cost_standard_conv(1, 64, 3, 3, 101, 40), (LayerCost{576, 2327040}));
  EXPECT_EQ(cost_depthwise(64, 3, 3, 101, 40), (LayerCost{576, 2327040}));
  EXPECT_EQ(cost_pointwise(64, 64, 101, 40), (LayerCost{4096, 16547840}));
  EXPECT_EQ(cost_standard_conv(64, 64, 3, 3, 1, 1).params, 36864u);
}

TEST(LayerCosts, MultipliesEqualParamsTimesPixels) {
  for (std::uint64_t c : {1u, 8u, 32u}) {
    for (std::uint64_t k : {1u, 3u, 5u}) {
      const LayerCost s = cost_standard_conv(c, 2 * c, k, k, 25, 20);
      EXPECT_EQ(s.multiplies, s.params * 25 * 20);
      const LayerCost d = cost_depthwise(c, k, k, 25, 20);
      EXPECT_EQ(d.multiplies, d.params * 25 * 20);
    }
  }
}

TEST(Rational, ReducesAndAdds) {
  EXPECT_EQ(Rational::make(6, 8), (Rational{3, 4}));
  EXPECT_EQ(Rational::make(1, 64) + Rational::make(1, 9), (Rational{73, 576}));
  EXPECT_EQ(Rational::make(73, 576).str(), "73/576");
  EXPECT_THROW(Rational::make(1, 0), Error);
}

TEST(Ratio, DepthwiseSeparableOverStandardIsExact) {
  const Rational r = ds_vs_standard_ratio(64, 3);
  EXPECT_EQ(r, Rational::make(1, 64) + Rational::make(1, 9));
  // The same value from the layer cost functions on matching dimensions.
  const LayerCost ds = [] {
    LayerCost c = cost_depthwise(64, 3, 3, 101, 40);
    c += cost_pointwise(64, 64, 101, 40);
    return c;
  }();
  const LayerCost st = cost_standard_conv(64, 64, 3, 3, 101, 40);
  EXPECT_EQ(Rational::make(ds.params, st.params), r);
  EXPECT_EQ(Rational::make(ds.multiplies, st.multiplies), r);
  EXPECT_NEAR(r.value(), 1.0 / 8.0, 0.01);
}

TEST(FormatLike, PrintedPrecision) {
  EXPECT_EQ(format_like(2327040, 'M', 1), "2.3M");
  EXPECT_EQ(format_like(285451648, 'M', 0), "285M");
  EXPECT_EQ(format_like(71936, 'K', 0), "72K");
  EXPECT_EQ(format_like(65408, 'K', 1), "65.4K");
  EXPECT_EQ(format_like(576, '\0', 0), "576");
  EXPECT_EQ(format_like(150, 'K', 1), "0.2K");
  EXPECT_EQ(format_like(15628096, 'M', 1), "15.6M");
}

TEST(Analyze, PresetTotals) {
  EXPECT_EQ(analyze(preset("DS-ResNet18")).totals, (LayerCost{71936, 285451648}));
  EXPECT_EQ(analyze(preset("DS-ResNet14")).totals, (LayerCost{15232, 15628096}));
  EXPECT_EQ(analyze(preset("DS-ResNet10")).totals, (LayerCost{9984, 5772096}));
}

TEST(Analyze, TotalsAreRowSums) {
  for (const auto& name : preset_names()) {
    const CostReport r = analyze(preset(name));
    LayerCost sum;
    for (const auto& row : r.rows) sum += row.cost;
    EXPECT_EQ(sum, r.totals) << name;
  }
}

TEST(Analyze, ParamsAgreeWithBuiltModel) {
  for (const auto& name : preset_names()) {
    EXPECT_EQ(analyze(preset(name)).totals.params, build(preset(name), 0).total_count()) << name;
  }
}

TEST(Analyze, PoolingShrinksLaterRows) {
  const CostReport r = analyze(preset("DS-ResNet10"));
  ASSERT_GE(r.rows.size(), 4u);
  EXPECT_EQ(r.rows[3].layer, "DS-Conv x7");
  EXPECT_EQ(r.rows[3].h, 25u);
  EXPECT_EQ(r.rows[3].w, 20u);
  EXPECT_EQ(r.rows[3].cost.multiplies, 4592000u);
}

TEST(Golden, AllThreeTablesVerify) {
  EXPECT_TRUE(all_passed(verify_golden(analyze(preset("DS-ResNet18")), 1)));
  EXPECT_TRUE(all_passed(verify_golden(analyze(preset("DS-ResNet14")), 2)));
  EXPECT_TRUE(all_passed(verify_golden(analyze(preset("DS-ResNet10")), 3)));
}

TEST(Golden, InconsistentPrintedTotalIsFlaggedNotFailed) {
  const auto checks = verify_golden(analyze(preset("DS-ResNet14")), 2);
  int errata = 0;
  for (const auto& c : checks) {
    if (c.erratum) {
      ++errata;
      EXPECT_EQ(c.field, "multiplies");
      EXPECT_EQ(c.expected, "15.7M");
      EXPECT_EQ(c.actual, "15.6M");
    }
  }
  EXPECT_EQ(errata, 1);
}

TEST(Golden, MissingWeightFailsNamingTheRow) {
  CostReport r = analyze(preset("DS-ResNet18"));
  r.rows[2].cost.params -= 1;
  r.totals.params -= 1;
  const auto checks = verify_golden(r, 1);
  EXPECT_FALSE(all_passed(checks));
  bool named = false;
  for (const auto& c : checks) {
    if (!c.passed && c.row.find("Res x7") != std::string::npos) named = true;
  }
  EXPECT_TRUE(named);
}

TEST(Golden, WrongArchitectureFails) {
  EXPECT_FALSE(all_passed(verify_golden(analyze(preset("DS-ResNet10")), 1)));
  EXPECT_THROW(golden_table(4), ConfigError);
}

TEST(Report, CsvHasHeaderRowsAndTotal) {
  std::ostringstream out;
  analyze(preset("DS-ResNet10")).print_csv(out);
  const std::string csv = out.str();
  EXPECT_EQ(csv.rfind("layer,params,multiplies,H,W\n", 0), 0u);
  EXPECT_NE(csv.find("Total,9984,5772096"), std::string::npos);
}

}  // namespace
}  // namespace dsresnet
