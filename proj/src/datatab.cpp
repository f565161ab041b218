// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#include "faithgate/datatab.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "faithgate/error.hpp"
#include "faithgate/random.hpp"

namespace faithgate {

const std::vector<std::string>& Dataset::subgroup_column(const std::string& name) const
{
    for (const auto& col : subgroup_columns) {
        if (col.name == name) {
            return col.values;
        }
    }
    throw DataError(fmt::format("dataset has no subgroup column '{}'", name));
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const
{
    Dataset out;
    out.feature_names = feature_names;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
    out.labels.reserve(rows.size());
    out.row_ids.reserve(rows.size());
    for (const auto& col : subgroup_columns) {
        out.subgroup_columns.push_back({col.name, {}});
        out.subgroup_columns.back().values.reserve(rows.size());
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto r = rows[i];
        if (r >= size()) {
            throw UsageError(fmt::format("row index {} out of range ({} rows)", r, size()));
        }
        out.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(r));
        out.labels.push_back(labels[r]);
        out.row_ids.push_back(row_ids[r]);
        for (std::size_t c = 0; c < subgroup_columns.size(); ++c) {
            out.subgroup_columns[c].values.push_back(subgroup_columns[c].values[r]);
        }
    }
    return out;
}

void Dataset::validate() const
{
    const auto n = labels.size();
    if (static_cast<std::size_t>(features.rows()) != n || row_ids.size() != n) {
        throw DataError("dataset columns differ in length");
    }
    if (static_cast<std::size_t>(features.cols()) != feature_names.size()) {
        throw DataError("dataset feature names do not match the feature matrix");
    }
    for (const auto& col : subgroup_columns) {
        if (col.values.size() != n) {
            throw DataError(fmt::format("subgroup column '{}' differs in length", col.name));
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] > 1) {
            throw DataError(fmt::format("row {}: label is not binary", row_ids[i]));
        }
    }
}

bool is_missing(const std::string& cell)
{
    if (cell.empty() || cell == "?") {
        return true;
    }
    std::string lower;
    for (char c : cell) {
        lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return lower == "na" || lower == "n/a" || lower == "nan" || lower == "null";
}

namespace {

std::size_t require_column(const CsvTable& table, const std::string& name, const char* role)
{
    const auto idx = table.column(name);
    if (idx == std::string::npos) {
        throw DataError(fmt::format("{} column '{}' not found in header", role, name));
    }
    return idx;
}

std::optional<double> parse_number(const std::string& cell)
{
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (!cell.empty() && *first == '+') {
        ++first;
    }
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

}  // namespace

LoadResult load_csv_table(const CsvTable& table, const CsvSchema& schema)
{
    if (schema.label_column.empty()) {
        throw UsageError("schema does not name a label column");
    }
    const auto label_idx = require_column(table, schema.label_column, "label");
    std::vector<std::size_t> numeric_idx;
    for (const auto& name : schema.numeric_features) {
        numeric_idx.push_back(require_column(table, name, "feature"));
    }
    std::vector<std::size_t> categorical_idx;
    for (const auto& cat : schema.categorical_features) {
        categorical_idx.push_back(require_column(table, cat.column, "feature"));
    }
    std::vector<std::size_t> subgroup_idx;
    for (const auto& name : schema.subgroup_columns) {
        subgroup_idx.push_back(require_column(table, name, "subgroup"));
    }
    std::size_t id_idx = std::string::npos;
    if (!schema.id_column.empty()) {
        id_idx = require_column(table, schema.id_column, "id");
    }
    std::vector<std::size_t> filter_idx;
    for (const auto& f : schema.filters) {
        filter_idx.push_back(require_column(table, f.column, "filter"));
    }

    std::vector<std::size_t> used = numeric_idx;
    used.insert(used.end(), categorical_idx.begin(), categorical_idx.end());
    used.insert(used.end(), subgroup_idx.begin(), subgroup_idx.end());
    used.push_back(label_idx);
    if (id_idx != std::string::npos) {
        used.push_back(id_idx);
    }

    LoadResult result;
    std::vector<std::size_t> kept;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        bool pass = true;
        for (std::size_t f = 0; f < schema.filters.size() && pass; ++f) {
            const auto& allowed = schema.filters[f].keep_values;
            pass = std::find(allowed.begin(), allowed.end(), row[filter_idx[f]]) != allowed.end();
        }
        if (!pass) {
            ++result.filtered_rows;
            continue;
        }
        const bool missing =
            std::any_of(used.begin(), used.end(), [&](std::size_t c) { return is_missing(row[c]); });
        if (missing) {
            ++result.dropped_rows;
            continue;
        }
        kept.push_back(r);
    }

    // category order: schema-fixed, else first appearance among kept rows
    std::vector<std::vector<std::string>> categories;
    for (std::size_t c = 0; c < schema.categorical_features.size(); ++c) {
        auto cats = schema.categorical_features[c].categories;
        const bool fixed = !cats.empty();
        for (auto r : kept) {
            const auto& v = table.rows[r][categorical_idx[c]];
            if (std::find(cats.begin(), cats.end(), v) == cats.end()) {
                if (fixed) {
                    throw DataError(fmt::format("line {}: column '{}' has undeclared category '{}'",
                                                table.line_numbers[r],
                                                schema.categorical_features[c].column, v));
                }
                cats.push_back(v);
            }
        }
        categories.push_back(std::move(cats));
    }

    Dataset& ds = result.dataset;
    ds.feature_names = schema.numeric_features;
    for (std::size_t c = 0; c < categories.size(); ++c) {
        for (const auto& cat : categories[c]) {
            ds.feature_names.push_back(fmt::format("{}={}", schema.categorical_features[c].column, cat));
        }
    }
    const auto n = static_cast<Eigen::Index>(kept.size());
    ds.features = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(ds.feature_names.size()));
    for (const auto& name : schema.subgroup_columns) {
        ds.subgroup_columns.push_back({name, {}});
    }

    for (Eigen::Index i = 0; i < n; ++i) {
        const auto r = kept[static_cast<std::size_t>(i)];
        const auto& row = table.rows[r];
        const auto line = table.line_numbers[r];
        Eigen::Index col = 0;
        for (std::size_t f = 0; f < numeric_idx.size(); ++f, ++col) {
            auto value = parse_number(row[numeric_idx[f]]);
            if (!value) {
                throw DataError(fmt::format("line {}: column '{}' is not numeric ('{}')", line,
                                            schema.numeric_features[f], row[numeric_idx[f]]));
            }
            ds.features(i, col) = *value;
        }
        for (std::size_t c = 0; c < categories.size(); ++c) {
            const auto& v = row[categorical_idx[c]];
            const auto pos = std::find(categories[c].begin(), categories[c].end(), v) - categories[c].begin();
            ds.features(i, col + pos) = 1.0;
            col += static_cast<Eigen::Index>(categories[c].size());
        }
        const auto& label = row[label_idx];
        if (label == schema.positive_label) {
            ds.labels.push_back(1);
        } else if (label == schema.negative_label) {
            ds.labels.push_back(0);
        } else {
            throw DataError(fmt::format("line {}: label '{}' is neither '{}' nor '{}'", line, label,
                                        schema.negative_label, schema.positive_label));
        }
        ds.row_ids.push_back(id_idx != std::string::npos ? row[id_idx] : std::to_string(r));
        for (std::size_t s = 0; s < subgroup_idx.size(); ++s) {
            ds.subgroup_columns[s].values.push_back(row[subgroup_idx[s]]);
        }
    }

    if (ds.size() == 0) {
        spdlog::warn("dataset has no usable rows ({} dropped, {} filtered)", result.dropped_rows,
                     result.filtered_rows);
    }
    if (result.dropped_rows > 0) {
        spdlog::info("dropped {} rows with missing values", result.dropped_rows);
    }
    return result;
}

LoadResult load_csv(const std::filesystem::path& path, const CsvSchema& schema)
{
    if (!std::filesystem::exists(path)) {
        throw DataError(fmt::format("data file '{}' does not exist", path.string()));
    }
    const auto table = read_csv(path, schema.delimiter);
    try {
        return load_csv_table(table, schema);
    } catch (const DataError& e) {
        throw DataError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

void SplitSpec::validate() const
{
    auto in_unit = [](double f) { return f > 0.0 && f < 1.0; };
    if (!in_unit(train) || !in_unit(test) || !(validation == 0.0 || in_unit(validation))) {
        throw UsageError(fmt::format("split fractions ({}, {}, {}) must lie in (0, 1)", train,
                                     validation, test));
    }
    if (std::abs(train + validation + test - 1.0) > 1e-9) {
        throw UsageError(fmt::format("split fractions ({}, {}, {}) must sum to 1", train,
                                     validation, test));
    }
}

namespace {

// Largest-remainder apportionment of `total` by `weights`; ties go to the
// lower index.
std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights)
{
    const double weight_sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<std::size_t> counts(weights.size(), 0);
    std::vector<double> remainder(weights.size(), 0.0);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double quota = weight_sum > 0.0 ? static_cast<double>(total) * weights[i] / weight_sum : 0.0;
        counts[i] = static_cast<std::size_t>(std::floor(quota + 1e-9));
        remainder[i] = quota - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < total; k = (k + 1) % order.size()) {
        if (weights[order[k]] > 0.0) {
            ++counts[order[k]];
            ++assigned;
        }
    }
    for (std::size_t k = order.size(); assigned > total;) {
        k = (k == 0 ? order.size() : k) - 1;
        if (counts[order[k]] > 0) {
            --counts[order[k]];
            --assigned;
        }
    }
    return counts;
}

}  // namespace

Splits stratified_split(const Dataset& ds, const SplitSpec& spec)
{
    spec.validate();
    const std::size_t n = ds.size();
    const double fractions[3] = {spec.train, spec.validation, spec.test};
    const auto sizes = apportion(n, fractions);

    std::vector<std::size_t> positives;
    std::vector<std::size_t> negatives;
    for (std::size_t i = 0; i < n; ++i) {
        (ds.labels[i] == 1 ? positives : negatives).push_back(i);
    }
    const double size_weights[3] = {static_cast<double>(sizes[0]), static_cast<double>(sizes[1]),
                                    static_cast<double>(sizes[2])};
    const auto pos_counts = apportion(positives.size(), size_weights);

    static constexpr const char* kNames[3] = {"train", "validation", "test"};
    for (std::size_t s = 0; s < 3; ++s) {
        if (fractions[s] == 0.0) {
            continue;
        }
        const auto neg = sizes[s] - pos_counts[s];
        if (pos_counts[s] == 0 || neg == 0) {
            throw DataError(fmt::format(
                "class too small to stratify: {} split would get {} positive and {} negative rows",
                kNames[s], pos_counts[s], neg));
        }
    }

    Rng rng(spec.seed);
    rng.shuffle(std::span<std::size_t>(positives));
    rng.shuffle(std::span<std::size_t>(negatives));

    std::vector<std::size_t> parts[3];
    std::size_t pos_at = 0;
    std::size_t neg_at = 0;
    for (std::size_t s = 0; s < 3; ++s) {
        const auto take_pos = pos_counts[s];
        const auto take_neg = sizes[s] - pos_counts[s];
        parts[s].insert(parts[s].end(), positives.begin() + static_cast<std::ptrdiff_t>(pos_at),
                        positives.begin() + static_cast<std::ptrdiff_t>(pos_at + take_pos));
        parts[s].insert(parts[s].end(), negatives.begin() + static_cast<std::ptrdiff_t>(neg_at),
                        negatives.begin() + static_cast<std::ptrdiff_t>(neg_at + take_neg));
        pos_at += take_pos;
        neg_at += take_neg;
        std::sort(parts[s].begin(), parts[s].end());
    }

    Splits out;
    out.train = ds.subset(parts[0]);
    out.test = ds.subset(parts[2]);
    if (spec.validation > 0.0) {
        out.validation = ds.subset(parts[1]);
    }
    out.train_rows = std::move(parts[0]);
    out.validation_rows = std::move(parts[1]);
    out.test_rows = std::move(parts[2]);
    return out;
}

Eigen::MatrixXd Standardizer::transform(const Eigen::MatrixXd& x) const
{
    if (x.cols() != mean.size()) {
        throw UsageError(fmt::format("standardizer fitted on {} features applied to {}", mean.size(),
                                     x.cols()));
    }
    Eigen::MatrixXd out(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        out.col(c) = (x.col(c).array() - mean(c)) / scale(c);
    }
    return out;
}

Standardizer fit_standardizer(const Dataset& train)
{
    if (train.size() == 0) {
        throw UsageError("cannot fit a standardizer on an empty training split");
    }
    const auto& x = train.features;
    const double n = static_cast<double>(x.rows());
    Standardizer s;
    s.mean.resize(x.cols());
    s.scale.resize(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double mu = x.col(c).sum() / n;
        const double var = (x.col(c).array() - mu).square().sum() / n;
        const double sd = std::sqrt(var);
        if (sd > 1e-12 * std::max(1.0, std::abs(mu))) {
            s.mean(c) = mu;
            s.scale(c) = sd;
        } else {
            // constant column: centre on the value itself so it maps to exactly 0
            s.mean(c) = x(0, c);
            s.scale(c) = 1.0;
        }
    }
    return s;
}

Dataset apply_standardizer(const Standardizer& standardizer, const Dataset& ds)
{
    Dataset out = ds;
    out.features = standardizer.transform(ds.features);
    return out;
}

std::vector<std::size_t> GroupAssignment::sizes() const
{
    std::vector<std::size_t> out(groups.size(), 0);
    for (auto g : membership) {
        ++out[g];
    }
    return out;
}

std::vector<std::size_t> GroupAssignment::rows_of(std::size_t group) const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < membership.size(); ++i) {
        if (membership[i] == group) {
            out.push_back(i);
        }
    }
    return out;
}

GroupAssignment assign_groups(std::span<const std::string> raw, const SubgroupSpec& spec)
{
    GroupAssignment out;
    out.name = spec.name;
    out.membership.reserve(raw.size());

    if (const auto* rule = std::get_if<ThresholdRule>(&spec.rule)) {
        out.groups = {rule->below_label, rule->at_or_above_label};
        for (std::size_t i = 0; i < raw.size(); ++i) {
            auto value = parse_number(raw[i]);
            if (!value) {
                throw DataError(fmt::format("subgroup '{}': row {} value '{}' is not numeric",
                                            spec.name, i, raw[i]));
            }
            out.membership.push_back(*value < rule->threshold ? 0 : 1);
        }
    } else if (const auto* rule = std::get_if<MappingRule>(&spec.rule)) {
        std::map<std::string, std::size_t> lookup;
        for (std::size_t g = 0; g < rule->groups.size(); ++g) {
            out.groups.push_back(rule->groups[g].first);
            for (const auto& v : rule->groups[g].second) {
                if (!lookup.emplace(v, g).second) {
                    throw UsageError(fmt::format("subgroup '{}': value '{}' mapped to two groups",
                                                 spec.name, v));
                }
            }
        }
        for (std::size_t i = 0; i < raw.size(); ++i) {
            auto it = lookup.find(raw[i]);
            if (it == lookup.end()) {
                throw DataError(fmt::format("subgroup '{}': row {} value '{}' is not mapped to a group",
                                            spec.name, i, raw[i]));
            }
            out.membership.push_back(it->second);
        }
    } else {
        std::map<std::string, std::size_t> lookup;
        for (const auto& v : raw) {
            auto [it, inserted] = lookup.emplace(v, out.groups.size());
            if (inserted) {
                out.groups.push_back(v);
            }
            out.membership.push_back(it->second);
        }
    }
    return out;
}

std::vector<GroupAssignment> derive_subgroups(const Dataset& ds, std::span<const SubgroupSpec> specs)
{
    std::vector<GroupAssignment> out;
    for (const auto& spec : specs) {
        out.push_back(assign_groups(ds.subgroup_column(spec.source_column), spec));
    }
    return out;
}

}  // namespace faithgate
