// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsresnet/cost_analyzer.hpp"

#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include "dsresnet/errors.hpp"
#include "dsresnet/se_block.hpp"

namespace dsresnet {
namespace {

std::uint64_t pow10(int n) {
  std::uint64_t v = 1;
  while (n-- > 0) v *= 10;
  return v;
}

// Parsed form of a printed table number such as "2.3M".
struct Printed {
  char suffix = 0;
  int decimals = 0;
  bool valid = false;
};

Printed parse_printed(const std::string& text) {
  Printed p;
  if (text.empty() || text == "-") return p;
  std::string digits = text;
  const char last = digits.back();
  if (last == 'K' || last == 'M') {
    p.suffix = last;
    digits.pop_back();
  }
  const auto dot = digits.find('.');
  p.decimals = dot == std::string::npos ? 0 : static_cast<int>(digits.size() - dot - 1);
  p.valid = true;
  return p;
}

// Value of a printed number in units (e.g. "2.3M" -> 2 300 000).
std::uint64_t printed_value(const std::string& text) {
  const Printed p = parse_printed(text);
  std::string digits = text;
  if (p.suffix) digits.pop_back();
  std::uint64_t mantissa = 0;
  for (char ch : digits) {
    if (ch != '.') mantissa = mantissa * 10 + static_cast<std::uint64_t>(ch - '0');
  }
  const std::uint64_t unit = p.suffix == 'M' ? 1'000'000 : p.suffix == 'K' ? 1'000 : 1;
  return mantissa * unit / pow10(p.decimals);
}

GoldenCheck compare(const std::string& row, const std::string& field, const std::string& printed,
                    std::uint64_t actual) {
  GoldenCheck check;
  check.row = row;
  check.field = field;
  check.expected = printed;
  const Printed p = parse_printed(printed);
  check.actual = format_like(actual, p.suffix, p.decimals);
  check.passed = check.actual == printed;
  if (!check.passed) {
    check.note = "value " + std::to_string(actual) + " formats as " + check.actual;
  }
  return check;
}

std::string ds_label(const char* base, int count) {
  return count == 1 ? std::string(base) : std::string(base) + " x" + std::to_string(count);
}

std::vector<GoldenTable> make_tables() {
  std::vector<GoldenTable> tables(3);
  tables[0] = {1,
               "DS-ResNet18",
               {{"Conv", "576", "2.3M", 576},
                {"SE", "512", "576", 512},
                {"Res x7", "65.4K", "264M", 65'408},
                {"DS-Conv", "4672", "18.9M", 4'672},
                {"Avg-Pool", "-", "64"},
                {"Softmax", "768", "768", 768}},
               "72K",
               "285M",
               71'936,
               false};
  tables[1] = {2,
               "DS-ResNet14",
               {{"Conv", "288", "1.2M", 288},
                {"SE", "128", "160", 128},
                {"Avg-Pool", "-", "32K"},
                {"Res x5", "13.1K", "13.1M", 13'120},
                {"DS-Conv", "1312", "1.3M", 1'312},
                {"Avg-Pool", "-", "32"},
                {"Softmax", "384", "384", 384}},
               "15.2K",
               "15.7M",
               15'232,
               // The printed rows sum to 15.63M, which prints as 15.6M.
               true};
  tables[2] = {3,
               "DS-ResNet10",
               {{"Conv", "288", "1.2M", 288},
                {"SE", "128", "160", 128},
                {"Avg-Pool", "-", "16K"},
                {"DS-Conv x7", "9.2K", "4.6M", 9'184},
                {"Avg-Pool", "-", "32"},
                {"Softmax", "384", "384", 384}},
               "10K",
               "5.8M",
               9'984,
               false};
  return tables;
}

}  // namespace

LayerCost cost_standard_conv(std::uint64_t c_in, std::uint64_t c_out, std::uint64_t kernel_h,
                             std::uint64_t kernel_w, std::uint64_t h_in, std::uint64_t w_in) {
  const std::uint64_t params = c_in * kernel_h * kernel_w * c_out;
  return {params, params * h_in * w_in};
}

LayerCost cost_depthwise(std::uint64_t c_in, std::uint64_t kernel_h, std::uint64_t kernel_w,
                         std::uint64_t h_in, std::uint64_t w_in) {
  const std::uint64_t params = kernel_h * kernel_w * c_in;
  return {params, params * h_in * w_in};
}

LayerCost cost_pointwise(std::uint64_t c_in, std::uint64_t c_out, std::uint64_t h_in,
                         std::uint64_t w_in) {
  const std::uint64_t params = c_in * c_out;
  return {params, params * h_in * w_in};
}

Rational Rational::make(std::uint64_t num, std::uint64_t den) {
  if (den == 0) throw ConfigError("rational with zero denominator");
  const std::uint64_t g = std::gcd(num, den);
  return g == 0 ? Rational{0, 1} : Rational{num / g, den / g};
}

std::string Rational::str() const { return std::to_string(num) + "/" + std::to_string(den); }

Rational operator+(const Rational& a, const Rational& b) {
  return Rational::make(a.num * b.den + b.num * a.den, a.den * b.den);
}

Rational ds_vs_standard_ratio(std::uint64_t c_out, std::uint64_t kernel) {
  if (c_out == 0 || kernel == 0) throw ConfigError("ds_vs_standard_ratio: arguments must be positive");
  return Rational::make(1, c_out) + Rational::make(1, kernel * kernel);
}

CostReport analyze(const ArchitectureSpec& spec) {
  spec.validate();
  CostReport report;
  report.arch_name = spec.name;
  std::size_t channels = spec.input_channels, h = spec.input_height, w = spec.input_width;

  auto ds_cost = [&](const LayerConfig& l) {
    LayerCost cost = cost_depthwise(channels, l.m, l.r, h, w);
    if (spec.ds_se == SEPlacement::kAfterDepthwise) {
      const SEConfig se{channels, spec.se_reduction};
      cost += {se_param_count(se), se_multiply_count(se)};
    }
    cost += cost_pointwise(channels, l.n, h, w);
    channels = l.n;
    if (spec.ds_se == SEPlacement::kAfterPointwise) {
      const SEConfig se{channels, spec.se_reduction};
      cost += {se_param_count(se), se_multiply_count(se)};
    }
    return cost;
  };

  for (const LayerConfig& l : spec.layers) {
    CostRow row;
    row.h = h;
    row.w = w;
    switch (l.kind) {
      case LayerKind::kStandardConv:
        row.layer = "Conv";
        row.cost = cost_standard_conv(channels, l.n, l.m, l.r, h, w);
        channels = l.n;
        break;
      case LayerKind::kSE: {
        const SEConfig se{channels, spec.se_reduction};
        row.layer = "SE";
        row.cost = {se_param_count(se), se_multiply_count(se)};
        break;
      }
      case LayerKind::kAvgPool:
        row.layer = "Avg-Pool";
        row.has_params = false;
        h = (h - l.m) / l.m + 1;
        w = (w - l.r) / l.r + 1;
        row.cost = {0, channels * h * w};
        break;
      case LayerKind::kResidualGroup:
        row.layer = ds_label("Res", l.repeat);
        for (int k = 0; k < l.repeat * l.layers_per_block; ++k) row.cost += ds_cost(l);
        break;
      case LayerKind::kDSConv:
        row.layer = ds_label("DS-Conv", l.repeat);
        for (int k = 0; k < l.repeat; ++k) row.cost += ds_cost(l);
        break;
      case LayerKind::kGlobalAvgPool:
        row.layer = "Avg-Pool";
        row.has_params = false;
        row.cost = {0, channels};
        break;
      case LayerKind::kSoftmaxFC:
        row.layer = "Softmax";
        row.cost = {channels * static_cast<std::uint64_t>(l.n),
                    channels * static_cast<std::uint64_t>(l.n)};
        channels = l.n;
        break;
    }
    report.totals += row.cost;
    report.rows.push_back(std::move(row));
  }
  return report;
}

void CostReport::print_table(std::ostream& out) const {
  out << arch_name << "\n";
  out << std::left << std::setw(14) << "Layer" << std::right << std::setw(12) << "#Params"
      << std::setw(16) << "#Multiplies" << std::setw(8) << "H" << std::setw(6) << "W" << "\n";
  out << std::string(56, '-') << "\n";
  for (const CostRow& row : rows) {
    out << std::left << std::setw(14) << row.layer << std::right << std::setw(12)
        << (row.has_params ? std::to_string(row.cost.params) : std::string("-")) << std::setw(16)
        << row.cost.multiplies << std::setw(8) << row.h << std::setw(6) << row.w << "\n";
  }
  out << std::string(56, '=') << "\n";
  out << std::left << std::setw(14) << "Total" << std::right << std::setw(12) << totals.params
      << std::setw(16) << totals.multiplies << "\n";
  out << std::left << std::setw(14) << "" << std::right << std::setw(12)
      << format_like(totals.params, 'K', 1) << std::setw(16)
      << format_like(totals.multiplies, 'M', 1) << "\n";
}

void CostReport::print_csv(std::ostream& out) const {
  out << "layer,params,multiplies,H,W\n";
  for (const CostRow& row : rows) {
    out << row.layer << "," << (row.has_params ? std::to_string(row.cost.params) : std::string())
        << "," << row.cost.multiplies << "," << row.h << "," << row.w << "\n";
  }
  out << "Total," << totals.params << "," << totals.multiplies << ",,\n";
}

std::string format_like(std::uint64_t value, char suffix, int decimals) {
  const std::uint64_t unit = suffix == 'M' ? 1'000'000 : suffix == 'K' ? 1'000 : 1;
  const std::uint64_t scale = pow10(decimals);
  // Round half up in integer arithmetic: q = round(value * scale / unit).
  const std::uint64_t q = (value * scale + unit / 2) / unit;
  std::ostringstream out;
  out << q / scale;
  if (decimals > 0) out << "." << std::setw(decimals) << std::setfill('0') << q % scale;
  if (suffix) out << suffix;
  return out.str();
}

const GoldenTable& golden_table(int table_id) {
  static const std::vector<GoldenTable> tables = make_tables();
  if (table_id < 1 || table_id > 3) {
    throw ConfigError("golden table id must be 1, 2 or 3, got " + std::to_string(table_id));
  }
  return tables[table_id - 1];
}

std::vector<GoldenCheck> verify_golden(const CostReport& report, int table_id) {
  const GoldenTable& table = golden_table(table_id);
  std::vector<GoldenCheck> checks;
  const std::size_t n = std::max(table.rows.size(), report.rows.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= report.rows.size()) {
      GoldenCheck missing{table.rows[i].layer, "row", table.rows[i].layer, "(missing)", false, false, {}};
      missing.note = "report has no row " + std::to_string(i);
      checks.push_back(missing);
      continue;
    }
    const CostRow& row = report.rows[i];
    if (i >= table.rows.size()) {
      GoldenCheck extra{row.layer, "row", "(none)", row.layer, false, false, {}};
      extra.note = "report has an extra row";
      checks.push_back(extra);
      continue;
    }
    const GoldenRow& golden = table.rows[i];
    const std::string name = golden.layer + " (row " + std::to_string(i + 1) + ")";
    if (row.layer != golden.layer) {
      GoldenCheck label{name, "layer", golden.layer, row.layer, false, false, {}};
      label.note = "layer kind differs";
      checks.push_back(label);
    }
    if (golden.params == "-") {
      GoldenCheck none{name, "params", "-", row.has_params ? std::to_string(row.cost.params) : "-", false, false, {}};
      none.passed = !row.has_params || row.cost.params == 0;
      checks.push_back(none);
    } else {
      checks.push_back(compare(name, "params", golden.params, row.cost.params));
      GoldenCheck exact_row{name, "params (exact)", std::to_string(golden.exact_params),
                            std::to_string(row.cost.params), false, false, {}};
      exact_row.passed = row.cost.params == golden.exact_params;
      if (!exact_row.passed) {
        exact_row.note = "delta " + std::to_string(static_cast<std::int64_t>(row.cost.params) -
                                                   static_cast<std::int64_t>(golden.exact_params));
      }
      checks.push_back(exact_row);
    }
    checks.push_back(compare(name, "multiplies", golden.multiplies, row.cost.multiplies));
  }

  GoldenCheck exact{"Total", "params (exact)", std::to_string(table.exact_total_params),
                    std::to_string(report.totals.params), false, false, {}};
  exact.passed = report.totals.params == table.exact_total_params;
  if (!exact.passed) {
    const auto delta = static_cast<std::int64_t>(report.totals.params) -
                       static_cast<std::int64_t>(table.exact_total_params);
    exact.note = "delta " + std::to_string(delta);
  }
  checks.push_back(exact);
  checks.push_back(compare("Total", "params", table.total_params, report.totals.params));

  GoldenCheck total = compare("Total", "multiplies", table.total_multiplies,
                              report.totals.multiplies);
  if (!total.passed && table.total_multiplies_erratum) {
    std::uint64_t printed_sum = 0;
    for (const GoldenRow& r : table.rows) printed_sum += printed_value(r.multiplies);
    const Printed p = parse_printed(table.total_multiplies);
    total.erratum = true;
    total.note = "printed total " + table.total_multiplies + " disagrees with its own rows, which sum to " +
                 std::to_string(printed_sum) + " (" + format_like(printed_sum, p.suffix, p.decimals) +
                 ")";
  }
  checks.push_back(total);
  return checks;
}

bool all_passed(const std::vector<GoldenCheck>& checks) {
  for (const GoldenCheck& c : checks) {
    if (!c.passed && !c.erratum) return false;
  }
  return true;
}

}  // namespace dsresnet
