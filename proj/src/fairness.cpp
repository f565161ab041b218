// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#include "faithgate/fairness.hpp"

#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "faithgate/error.hpp"

namespace faithgate {

namespace {

template <typename T>
std::vector<T> gather(std::span<const T> values, const std::vector<std::size_t>& rows)
{
    std::vector<T> out;
    out.reserve(rows.size());
    for (auto r : rows) {
        out.push_back(values[r]);
    }
    return out;
}

void check_aligned(std::size_t a, std::size_t b, const GroupAssignment& membership)
{
    if (a != b || a != membership.membership.size()) {
        throw UsageError(fmt::format("demographic '{}': vectors are not aligned ({}, {}, {})",
                                     membership.name, a, b, membership.membership.size()));
    }
}

}  // namespace

std::vector<GroupRates> group_rates(std::span<const std::uint8_t> labels,
                                    std::span<const std::uint8_t> preds,
                                    const GroupAssignment& membership)
{
    check_aligned(labels.size(), preds.size(), membership);
    std::vector<GroupRates> out;
    for (std::size_t g = 0; g < membership.groups.size(); ++g) {
        const auto rows = membership.rows_of(g);
        GroupRates rates;
        rates.group_label = membership.groups[g];
        rates.support = rows.size();
        if (!rows.empty()) {
            const auto y = gather(labels, rows);
            const auto p = gather(preds, rows);
            rates.counts = confusion(y, p);
            const auto& c = rates.counts;
            if (c.tp + c.fn > 0) {
                rates.sensitivity = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
            }
            if (c.tn + c.fp > 0) {
                rates.specificity = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
            }
        }
        out.push_back(std::move(rates));
    }
    return out;
}

double equalized_odds_bias(std::span<const GroupRates> rates)
{
    if (rates.size() < 2) {
        throw StatError("equalized-odds bias needs at least two groups");
    }
    for (const auto& r : rates) {
        if (!r.defined()) {
            throw StatError(fmt::format("group '{}' has an undefined sensitivity or specificity",
                                        r.group_label));
        }
    }
    double specificity_gaps = 0.0;
    double sensitivity_gaps = 0.0;
    for (std::size_t i = 0; i < rates.size(); ++i) {
        for (std::size_t j = i + 1; j < rates.size(); ++j) {
            specificity_gaps += std::abs(*rates[j].specificity - *rates[i].specificity);
            sensitivity_gaps += std::abs(*rates[i].sensitivity - *rates[j].sensitivity);
        }
    }
    return specificity_gaps + sensitivity_gaps;
}

BiasReport bias_report(std::span<const std::uint8_t> labels, std::span<const std::uint8_t> preds,
                       const GroupAssignment& membership)
{
    BiasReport report;
    report.demographic = membership.name;
    report.group_rates = group_rates(labels, preds, membership);
    bool all_defined = report.group_rates.size() >= 2;
    for (const auto& r : report.group_rates) {
        all_defined = all_defined && r.defined();
    }
    if (all_defined) {
        report.bias = equalized_odds_bias(report.group_rates);
    } else {
        spdlog::warn("demographic '{}': a group lacks a label class; bias excluded", membership.name);
    }
    return report;
}

SubgroupAgreementResult subgroup_agreement(std::span<const std::uint8_t> baseline_preds,
                                           std::span<const std::uint8_t> compressed_preds,
                                           const GroupAssignment& membership, bool yates_for_2x2,
                                           const std::string& compressed_label)
{
    check_aligned(baseline_preds.size(), compressed_preds.size(), membership);
    if (membership.groups.size() < 2) {
        throw StatError(fmt::format("demographic '{}' has fewer than two groups", membership.name));
    }
    SubgroupAgreementResult out;
    out.demographic = membership.name;
    std::vector<ContingencyTable> blocks;
    for (std::size_t g = 0; g < membership.groups.size(); ++g) {
        const auto rows = membership.rows_of(g);
        if (rows.empty()) {
            throw StatError(fmt::format("demographic '{}': group '{}' is empty", membership.name,
                                        membership.groups[g]));
        }
        const auto base = gather(baseline_preds, rows);
        const auto comp = gather(compressed_preds, rows);
        auto table = class_distribution_table(base, comp, compressed_label);
        ChiSquareResult result;
        try {
            result = chi_square(table, yates_for_2x2);
        } catch (const StatError& e) {
            throw StatError(fmt::format("demographic '{}', group '{}': {}", membership.name,
                                        membership.groups[g], e.what()));
        }
        blocks.push_back(table);
        out.per_group.push_back({membership.groups[g], std::move(table), std::move(result)});
    }
    out.combined_table = ContingencyTable::stack(blocks, membership.groups);
    try {
        out.combined = chi_square(out.combined_table, yates_for_2x2);
    } catch (const StatError& e) {
        throw StatError(fmt::format("demographic '{}', combined table: {}", membership.name, e.what()));
    }
    return out;
}

}  // namespace faithgate
