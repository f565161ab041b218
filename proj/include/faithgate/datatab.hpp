// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "faithgate/csv.hpp"
#include "faithgate/metrics.hpp"

namespace faithgate {

// Raw values of a column kept for subgroup derivation.
struct NamedColumn {
    std::string name;
    std::vector<std::string> values;
};

// Features, binary labels, raw demographic columns and stable row ids.
// All columns have one entry per instance.
struct Dataset {
    std::vector<std::string> feature_names;
    Eigen::MatrixXd features;  // rows = instances
    BinaryVector labels;
    std::vector<std::string> row_ids;
    std::vector<NamedColumn> subgroup_columns;

    std::size_t size() const { return labels.size(); }
    std::size_t feature_count() const { return feature_names.size(); }

    // Raw values of subgroup column `name`; throws DataError if absent.
    const std::vector<std::string>& subgroup_column(const std::string& name) const;

    // Rows in the given order.
    Dataset subset(std::span<const std::size_t> rows) const;

    // Throws DataError when column lengths disagree or a label is not 0/1.
    void validate() const;
};

struct CategoricalFeature {
    std::string column;
    // Fixed category order; empty means first-appearance order.
    std::vector<std::string> categories;
};

struct RowFilter {
    std::string column;
    std::vector<std::string> keep_values;
};

// Column roles for CSV ingestion.
struct CsvSchema {
    std::string label_column;
    std::string positive_label = "1";
    std::string negative_label = "0";
    std::vector<std::string> numeric_features;
    std::vector<CategoricalFeature> categorical_features;
    std::vector<std::string> subgroup_columns;
    std::string id_column;  // empty: row ids are 0-based data row indices
    std::vector<RowFilter> filters;
    char delimiter = ',';
};

struct LoadResult {
    Dataset dataset;
    std::size_t dropped_rows = 0;   // rows with a missing value in a used column
    std::size_t filtered_rows = 0;  // rows excluded by schema filters
};

// Drops rows with missing values (empty, NA, N/A, NaN, ?) and one-hot encodes
// categorical features.
LoadResult load_csv(const std::filesystem::path& path, const CsvSchema& schema);
LoadResult load_csv_table(const CsvTable& table, const CsvSchema& schema);

bool is_missing(const std::string& cell);

struct SplitSpec {
    double train = 0.8;
    double validation = 0.0;  // 0 disables the validation split
    double test = 0.2;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Splits {
    Dataset train;
    std::optional<Dataset> validation;
    Dataset test;
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> validation_rows;
    std::vector<std::size_t> test_rows;
};

// Per-class stratified split. Split sizes are apportioned by largest
// remainder, then the positive class is apportioned across splits so each
// split's per-class count is within one instance of proportional.
Splits stratified_split(const Dataset& ds, const SplitSpec& spec);

// Per-feature mean and population standard deviation from a training split.
struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;  // population std; constant features get 1

    Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const;
};

Standardizer fit_standardizer(const Dataset& train);
Dataset apply_standardizer(const Standardizer& standardizer, const Dataset& ds);

// value < threshold -> below_label, otherwise at_or_above_label
struct ThresholdRule {
    double threshold = 0.0;
    std::string below_label;
    std::string at_or_above_label;
};

// Explicit raw-value lists per group, in group order.
struct MappingRule {
    std::vector<std::pair<std::string, std::vector<std::string>>> groups;
};

// Each distinct raw value is its own group, first-appearance order.
struct IdentityRule {};

using BinarizationRule = std::variant<IdentityRule, ThresholdRule, MappingRule>;

struct SubgroupSpec {
    std::string name;
    std::string source_column;
    BinarizationRule rule;
};

struct GroupAssignment {
    std::string name;
    std::vector<std::string> groups;       // group labels in report order
    std::vector<std::size_t> membership;   // group index per row

    std::vector<std::size_t> sizes() const;
    std::vector<std::size_t> rows_of(std::size_t group) const;
};

GroupAssignment assign_groups(std::span<const std::string> raw, const SubgroupSpec& spec);
std::vector<GroupAssignment> derive_subgroups(const Dataset& ds, std::span<const SubgroupSpec> specs);

}  // namespace faithgate
