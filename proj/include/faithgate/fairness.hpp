// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "faithgate/datatab.hpp"
#include "faithgate/metrics.hpp"
#include "faithgate/stat_test.hpp"

namespace faithgate {

// Sensitivity (TPR) and specificity (TNR) of one subgroup. A rate is empty
// when the group has no instance of the class it conditions on.
struct GroupRates {
    std::string group_label;
    std::optional<double> sensitivity;
    std::optional<double> specificity;
    std::size_t support = 0;
    ConfusionCounts counts;

    bool defined() const { return sensitivity.has_value() && specificity.has_value(); }
};

struct BiasReport {
    std::string demographic;
    std::vector<GroupRates> group_rates;
    std::optional<double> bias;  // empty when any group rate is undefined
};

struct GroupAgreement {
    std::string group_label;
    ContingencyTable table;
    ChiSquareResult result;
};

struct SubgroupAgreementResult {
    std::string demographic;
    std::vector<GroupAgreement> per_group;
    ContingencyTable combined_table;  // 2k x 2, rows = group x class
    ChiSquareResult combined;
};

std::vector<GroupRates> group_rates(std::span<const std::uint8_t> labels,
                                    std::span<const std::uint8_t> preds,
                                    const GroupAssignment& membership);

// Sum over unordered group pairs of |spec_i - spec_j| + |sens_i - sens_j|.
// Throws StatError for fewer than two groups or an undefined rate.
double equalized_odds_bias(std::span<const GroupRates> rates);

// Group rates plus bias; an undefined rate leaves `bias` empty and logs a warning.
BiasReport bias_report(std::span<const std::uint8_t> labels, std::span<const std::uint8_t> preds,
                       const GroupAssignment& membership);

// One class-by-model 2x2 table per group (Yates-corrected when enabled) plus
// the stacked 2k x 2 table tested without correction.
SubgroupAgreementResult subgroup_agreement(std::span<const std::uint8_t> baseline_preds,
                                           std::span<const std::uint8_t> compressed_preds,
                                           const GroupAssignment& membership,
                                           bool yates_for_2x2 = true,
                                           const std::string& compressed_label = "Compressed");

}  // namespace faithgate
