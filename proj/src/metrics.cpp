// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#include "faithgate/metrics.hpp"

#include <cmath>

#include <fmt/format.h>

#include "faithgate/error.hpp"

namespace faithgate {

ConfusionCounts confusion(std::span<const std::uint8_t> reference,
                          std::span<const std::uint8_t> predicted)
{
    if (reference.size() != predicted.size()) {
        throw UsageError(fmt::format("confusion: length mismatch ({} vs {})", reference.size(),
                                     predicted.size()));
    }
    if (reference.empty()) {
        throw UsageError("confusion: no instances");
    }
    ConfusionCounts c;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const auto ref = reference[i];
        const auto pred = predicted[i];
        if (ref > 1 || pred > 1) {
            throw DataError(fmt::format("confusion: non-binary value at index {}", i));
        }
        if (ref == 1) {
            (pred == 1 ? c.tp : c.fn) += 1;
        } else {
            (pred == 1 ? c.fp : c.tn) += 1;
        }
    }
    return c;
}

ClassificationMetrics classification_metrics(const ConfusionCounts& c)
{
    const auto total = c.total();
    if (total <= 0) {
        throw UsageError("classification_metrics: empty confusion counts");
    }
    ClassificationMetrics m;
    m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(total);

    if (c.tp + c.fp > 0) {
        m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    } else {
        m.precision_defined = false;
    }
    if (c.tp + c.fn > 0) {
        m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    } else {
        m.recall_defined = false;
    }
    if (m.precision_defined && m.recall_defined && m.precision + m.recall > 0.0) {
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    } else {
        m.f1_defined = false;
    }
    return m;
}

namespace {

void check_pair(std::span<const double> forecast, std::span<const double> actual, const char* what)
{
    if (forecast.size() != actual.size()) {
        throw UsageError(fmt::format("{}: length mismatch ({} vs {})", what, forecast.size(),
                                     actual.size()));
    }
    if (forecast.empty()) {
        throw UsageError(fmt::format("{}: no values", what));
    }
}

}  // namespace

double rmse(std::span<const double> forecast, std::span<const double> actual)
{
    check_pair(forecast, actual, "rmse");
    double sum = 0.0;
    for (std::size_t i = 0; i < forecast.size(); ++i) {
        const double d = forecast[i] - actual[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(forecast.size()));
}

double mape(std::span<const double> forecast, std::span<const double> actual)
{
    check_pair(forecast, actual, "mape");
    double sum = 0.0;
    for (std::size_t i = 0; i < forecast.size(); ++i) {
        if (actual[i] == 0.0) {
            throw StatError(fmt::format("mape: actual value at index {} is zero", i));
        }
        sum += std::abs(actual[i] - forecast[i]) / std::abs(actual[i]);
    }
    return sum / static_cast<double>(forecast.size());
}

double mean(std::span<const double> values)
{
    if (values.empty()) {
        throw UsageError("mean of zero values");
    }
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    return sum / static_cast<double>(values.size());
}

RunAggregate aggregate(std::span<const double> values)
{
    if (values.size() < 2) {
        throw StatError(fmt::format("sample standard deviation needs at least 2 runs, got {}",
                                    values.size()));
    }
    RunAggregate agg;
    agg.n_runs = values.size();
    agg.mean = mean(values);
    double ss = 0.0;
    for (double v : values) {
        ss += (v - agg.mean) * (v - agg.mean);
    }
    agg.sample_std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    return agg;
}

}  // namespace faithgate
