// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace faithgate {

using BinaryVector = std::vector<std::uint8_t>;

// Positive class is label 1. When `reference` is the baseline model's output
// instead of ground truth, these are the agreement counts.
struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t tn = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;

    std::int64_t total() const { return tp + tn + fp + fn; }

    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// Ratios with a zero denominator are reported as 0 and flagged undefined.
struct ClassificationMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool precision_defined = true;
    bool recall_defined = true;
    bool f1_defined = true;

    bool degenerate() const { return !(precision_defined && recall_defined && f1_defined); }
};

struct RunAggregate {
    double mean = 0.0;
    double sample_std = 0.0;
    std::size_t n_runs = 0;
};

ConfusionCounts confusion(std::span<const std::uint8_t> reference,
                          std::span<const std::uint8_t> predicted);

ClassificationMetrics classification_metrics(const ConfusionCounts& counts);

double rmse(std::span<const double> forecast, std::span<const double> actual);

// Mean absolute percentage error as a fraction (0.009 renders as 0.9%).
// Throws StatError if any actual value is zero.
double mape(std::span<const double> forecast, std::span<const double> actual);

double mean(std::span<const double> values);

// Mean and n-1 sample standard deviation; needs at least two values.
RunAggregate aggregate(std::span<const double> values);

}  // namespace faithgate
