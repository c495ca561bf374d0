// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0
//
// Analytic parameter and multiply accounting for stride-1 "same"
// convolutions, SE blocks, pooling and the output layer, plus the
// published cost tables of the three presets as golden data.
//
// Conventions: multiplies only (no additions); average pooling costs one
// multiply per output value; the SE block costs its two excitation layers
// plus one rescale per channel; everything is bias-free.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dsresnet/model_zoo.hpp"

namespace dsresnet {

struct LayerCost {
  std::uint64_t params = 0;
  std::uint64_t multiplies = 0;

  LayerCost& operator+=(const LayerCost& o) {
    params += o.params;
    multiplies += o.multiplies;
    return *this;
  }
  friend bool operator==(const LayerCost&, const LayerCost&) = default;
};

LayerCost cost_standard_conv(std::uint64_t c_in, std::uint64_t c_out, std::uint64_t kernel_h,
                             std::uint64_t kernel_w, std::uint64_t h_in, std::uint64_t w_in);
LayerCost cost_depthwise(std::uint64_t c_in, std::uint64_t kernel_h, std::uint64_t kernel_w,
                         std::uint64_t h_in, std::uint64_t w_in);
LayerCost cost_pointwise(std::uint64_t c_in, std::uint64_t c_out, std::uint64_t h_in,
                         std::uint64_t w_in);

/// Exact non-negative fraction in lowest terms.
struct Rational {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  static Rational make(std::uint64_t num, std::uint64_t den);
  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  std::string str() const;

  friend Rational operator+(const Rational& a, const Rational& b);
  friend bool operator==(const Rational&, const Rational&) = default;
};

/// Depthwise-separable / standard cost with C_in = C_out:
/// 1/C_out + 1/D_K^2. The same ratio holds for parameters and multiplies.
Rational ds_vs_standard_ratio(std::uint64_t c_out, std::uint64_t kernel);

struct CostRow {
  std::string layer;
  LayerCost cost;
  bool has_params = true;  // false prints "-" (pooling rows)
  std::size_t h = 0;       // input spatial size of this row
  std::size_t w = 0;
};

struct CostReport {
  std::string arch_name;
  std::vector<CostRow> rows;
  LayerCost totals;

  void print_table(std::ostream& out) const;
  /// Columns: layer, params, multiplies, H, W; then a "Total" line.
  void print_csv(std::ostream& out) const;
};

/// One row per architecture layer (residual groups aggregated), tracking
/// the spatial size through pooling.
CostReport analyze(const ArchitectureSpec& spec);

/// Formats `value` the way the published tables print numbers: "576",
/// "2.3M", "65.4K" with `decimals` digits after the point and suffix ""/K/M.
std::string format_like(std::uint64_t value, char suffix, int decimals);

struct GoldenCheck {
  std::string row;
  std::string field;     // "params" or "multiplies"
  std::string expected;  // as printed in the table
  std::string actual;    // our value formatted to the printed precision
  bool passed = false;
  bool erratum = false;  // printed value contradicts the table's own rows
  std::string note;
};

struct GoldenRow {
  std::string layer;
  std::string params;      // "-" when the table prints none
  std::string multiplies;
  std::uint64_t exact_params = 0;  // the printed value before rounding
};
struct GoldenTable {
  int id = 0;
  std::string arch_name;
  std::vector<GoldenRow> rows;  // without the total line
  std::string total_params;
  std::string total_multiplies;
  std::uint64_t exact_total_params = 0;
  bool total_multiplies_erratum = false;
};
/// Published table `table_id` (1: DS-ResNet18, 2: DS-ResNet14,
/// 3: DS-ResNet10). Throws ConfigError on other ids.
const GoldenTable& golden_table(int table_id);

/// Compares a report against a published table. Parameter counts must
/// match exactly (per row and in total) and also format to the printed
/// value.
/// Multiply counts must match after rounding to printed precision.
/// A row-count mismatch fails with a check naming the missing row.
std::vector<GoldenCheck> verify_golden(const CostReport& report, int table_id);

/// True iff every non-erratum check passed.
bool all_passed(const std::vector<GoldenCheck>& checks);

}  // namespace dsresnet
