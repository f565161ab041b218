// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#include "faithgate/stat_test.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "faithgate/error.hpp"

namespace faithgate {

ContingencyTable::ContingencyTable(std::size_t rows, std::size_t cols,
                                   std::vector<std::int64_t> observed,
                                   std::vector<std::string> row_labels,
                                   std::vector<std::string> col_labels)
    : rows_(rows), cols_(cols), observed_(std::move(observed)),
      row_labels_(std::move(row_labels)), col_labels_(std::move(col_labels))
{
    if (rows_ < 2 || cols_ < 2) {
        throw UsageError(fmt::format("contingency table must be at least 2x2, got {}x{}", rows_, cols_));
    }
    if (observed_.size() != rows_ * cols_) {
        throw UsageError(fmt::format("contingency table {}x{} needs {} counts, got {}", rows_, cols_,
                                     rows_ * cols_, observed_.size()));
    }
    for (auto v : observed_) {
        if (v < 0) {
            throw UsageError("contingency table counts must be non-negative");
        }
    }
    if (row_labels_.empty()) {
        for (std::size_t r = 0; r < rows_; ++r) {
            row_labels_.push_back(fmt::format("row {}", r));
        }
    }
    if (col_labels_.empty()) {
        for (std::size_t c = 0; c < cols_; ++c) {
            col_labels_.push_back(fmt::format("col {}", c));
        }
    }
    if (row_labels_.size() != rows_ || col_labels_.size() != cols_) {
        throw UsageError("contingency table label count does not match its shape");
    }
}

std::int64_t ContingencyTable::row_sum(std::size_t r) const
{
    std::int64_t s = 0;
    for (std::size_t c = 0; c < cols_; ++c) {
        s += at(r, c);
    }
    return s;
}

std::int64_t ContingencyTable::col_sum(std::size_t c) const
{
    std::int64_t s = 0;
    for (std::size_t r = 0; r < rows_; ++r) {
        s += at(r, c);
    }
    return s;
}

std::int64_t ContingencyTable::total() const
{
    std::int64_t s = 0;
    for (auto v : observed_) {
        s += v;
    }
    return s;
}

ContingencyTable ContingencyTable::stack(std::span<const ContingencyTable> blocks,
                                         std::span<const std::string> prefixes)
{
    if (blocks.empty()) {
        throw UsageError("cannot stack zero tables");
    }
    if (prefixes.size() != blocks.size()) {
        throw UsageError("one row prefix per stacked table is required");
    }
    const std::size_t cols = blocks.front().cols();
    std::vector<std::int64_t> observed;
    std::vector<std::string> labels;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto& block = blocks[b];
        if (block.cols() != cols) {
            throw UsageError("stacked tables must share their column count");
        }
        observed.insert(observed.end(), block.observed().begin(), block.observed().end());
        for (const auto& label : block.row_labels()) {
            labels.push_back(fmt::format("{}: {}", prefixes[b], label));
        }
    }
    const std::size_t rows = observed.size() / cols;
    return ContingencyTable(rows, cols, std::move(observed), std::move(labels),
                            blocks.front().col_labels());
}

ContingencyTable class_distribution_table(std::span<const std::uint8_t> baseline_preds,
                                          std::span<const std::uint8_t> compressed_preds,
                                          std::string compressed_label)
{
    if (baseline_preds.size() != compressed_preds.size()) {
        throw UsageError(fmt::format("prediction vectors differ in length ({} vs {})",
                                     baseline_preds.size(), compressed_preds.size()));
    }
    if (baseline_preds.empty()) {
        throw UsageError("class distribution table needs at least one prediction");
    }
    std::int64_t base_pos = 0;
    std::int64_t comp_pos = 0;
    for (std::size_t i = 0; i < baseline_preds.size(); ++i) {
        if (baseline_preds[i] > 1 || compressed_preds[i] > 1) {
            throw DataError(fmt::format("non-binary prediction at index {}", i));
        }
        base_pos += baseline_preds[i];
        comp_pos += compressed_preds[i];
    }
    const auto n = static_cast<std::int64_t>(baseline_preds.size());
    return ContingencyTable(2, 2, {n - base_pos, n - comp_pos, base_pos, comp_pos},
                            {"class 0", "class 1"}, {"Baseline", std::move(compressed_label)});
}

ChiSquareResult chi_square(const ContingencyTable& table, bool yates_for_2x2)
{
    const std::size_t rows = table.rows();
    const std::size_t cols = table.cols();
    std::vector<double> row_sums(rows);
    std::vector<double> col_sums(cols);
    for (std::size_t r = 0; r < rows; ++r) {
        row_sums[r] = static_cast<double>(table.row_sum(r));
    }
    for (std::size_t c = 0; c < cols; ++c) {
        col_sums[c] = static_cast<double>(table.col_sum(c));
    }
    const double n = static_cast<double>(table.total());

    ChiSquareResult result;
    result.rows = rows;
    result.cols = cols;
    result.dof = static_cast<int>((rows - 1) * (cols - 1));
    result.expected.resize(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double e = n > 0.0 ? row_sums[r] * col_sums[c] / n : 0.0;
            if (!(e > 0.0)) {
                throw StatError(fmt::format(
                    "degenerate table: expected count of cell ({}, {}) [{} / {}] is zero",
                    r, c, table.row_labels()[r], table.col_labels()[c]));
            }
            result.expected[r * cols + c] = e;
        }
    }

    result.correction_applied = yates_for_2x2 && rows == 2 && cols == 2;
    double statistic = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double e = result.expected[r * cols + c];
            double diff = std::abs(static_cast<double>(table.at(r, c)) - e);
            if (result.correction_applied) {
                diff = std::max(0.0, diff - 0.5);
            }
            statistic += diff * diff / e;
        }
    }
    result.statistic = statistic;
    result.p_value = chi_square_sf(statistic, result.dof);
    return result;
}

namespace {

constexpr int kMaxIterations = 10000;
constexpr double kEpsilon = 1e-16;
constexpr double kTiny = 1e-300;

// Lower regularized gamma P(a, x) by its power series; valid for x < a + 1.
double lower_series(double a, double x)
{
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < kMaxIterations; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * kEpsilon) {
            break;
        }
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized gamma Q(a, x) by modified Lentz continued fraction; x >= a + 1.
double upper_continued_fraction(double a, double x)
{
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxIterations; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < kTiny) {
            d = kTiny;
        }
        c = b + an / c;
        if (std::abs(c) < kTiny) {
            c = kTiny;
        }
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEpsilon) {
            break;
        }
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double reg_upper_gamma(double a, double x)
{
    if (!std::isfinite(a) || !std::isfinite(x)) {
        throw UsageError("reg_upper_gamma: non-finite argument");
    }
    if (a <= 0.0) {
        throw UsageError(fmt::format("reg_upper_gamma: shape must be positive, got {}", a));
    }
    if (x < 0.0) {
        throw UsageError(fmt::format("reg_upper_gamma: x must be non-negative, got {}", x));
    }
    if (x == 0.0) {
        return 1.0;
    }
    if (x < a + 1.0) {
        return std::clamp(1.0 - lower_series(a, x), 0.0, 1.0);
    }
    return std::clamp(upper_continued_fraction(a, x), 0.0, 1.0);
}

double chi_square_sf(double statistic, int dof)
{
    if (dof < 1) {
        throw UsageError("chi-squared degrees of freedom must be positive");
    }
    if (!(statistic >= 0.0)) {
        throw UsageError("chi-squared statistic must be non-negative");
    }
    return reg_upper_gamma(0.5 * dof, 0.5 * statistic);
}

}  // namespace faithgate
