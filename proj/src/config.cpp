// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#include "faithgate/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <toml.hpp>

#include "faithgate/error.hpp"

namespace faithgate {

namespace {

// Reads keys from one TOML table and remembers which ones were consumed so
// leftovers can be reported.
class Section {
public:
    Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

    const toml::node* node(const std::string& key)
    {
        used_.insert(key);
        return table_ ? table_->get(key) : nullptr;
    }

    template <typename T>
    std::optional<T> get(const std::string& key)
    {
        const auto* n = node(key);
        if (n == nullptr) {
            return std::nullopt;
        }
        return convert<T>(*n, key);
    }

    template <typename T>
    T get_or(const std::string& key, T fallback)
    {
        return get<T>(key).value_or(std::move(fallback));
    }

    template <typename T>
    T require(const std::string& key)
    {
        auto v = get<T>(key);
        if (!v) {
            throw UsageError(fmt::format("config: [{}] needs '{}'", name_, key));
        }
        return *v;
    }

    template <typename T>
    std::optional<std::vector<T>> get_list(const std::string& key)
    {
        const auto* n = node(key);
        if (n == nullptr) {
            return std::nullopt;
        }
        const auto* arr = n->as_array();
        if (arr == nullptr) {
            throw UsageError(fmt::format("config: {}.{} must be an array", name_, key));
        }
        std::vector<T> out;
        for (const auto& item : *arr) {
            out.push_back(convert<T>(item, key));
        }
        return out;
    }

    void finish() const
    {
        if (table_ == nullptr) {
            return;
        }
        for (const auto& [key, value] : *table_) {
            const std::string k(key.str());
            if (!used_.contains(k) && !value.is_table()) {
                throw UsageError(fmt::format("config: unknown key '{}' in [{}]", k, name_));
            }
        }
    }

    const std::string& name() const { return name_; }

private:
    template <typename T>
    T convert(const toml::node& n, const std::string& key) const
    {
        if constexpr (std::is_same_v<T, bool>) {
            if (auto v = n.value_exact<bool>()) {
                return *v;
            }
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (auto v = n.value_exact<std::string>()) {
                return *v;
            }
            // numbers are accepted where labels are expected
            if (auto i = n.value_exact<std::int64_t>()) {
                return std::to_string(*i);
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (n.is_number()) {
                return *n.value<double>();
            }
        } else if constexpr (std::is_integral_v<T>) {
            if (auto v = n.value_exact<std::int64_t>()) {
                if (*v < 0 && std::is_unsigned_v<T>) {
                    throw UsageError(fmt::format("config: {}.{} must not be negative", name_, key));
                }
                return static_cast<T>(*v);
            }
        }
        throw UsageError(fmt::format("config: {}.{} has the wrong type", name_, key));
    }

    const toml::table* table_;
    std::string name_;
    std::set<std::string> used_;
};

const toml::table* subtable(const toml::table& root, const char* key)
{
    const auto* n = root.get(key);
    if (n == nullptr) {
        return nullptr;
    }
    if (!n->is_table()) {
        throw UsageError(fmt::format("config: '{}' must be a table", key));
    }
    return n->as_table();
}

SubgroupSpec read_subgroup(Section& s)
{
    SubgroupSpec spec;
    spec.name = s.require<std::string>("name");
    spec.source_column = s.get_or<std::string>("column", spec.name);
    const auto threshold = s.get<double>("threshold");
    const auto groups = s.get_list<std::string>("groups");
    const auto* members = s.node("members");
    if (threshold && (groups || members)) {
        throw UsageError(fmt::format("config: subgroup '{}' mixes a threshold with explicit groups", spec.name));
    }
    if (threshold) {
        ThresholdRule rule;
        rule.threshold = *threshold;
        rule.below_label = s.get_or<std::string>("below", fmt::format("< {}", *threshold));
        rule.at_or_above_label = s.get_or<std::string>("at_or_above", fmt::format(">= {}", *threshold));
        spec.rule = rule;
    } else if (groups || members) {
        if (!groups || members == nullptr || !members->is_array()) {
            throw UsageError(fmt::format("config: subgroup '{}' needs both 'groups' and 'members'", spec.name));
        }
        const auto& arr = *members->as_array();
        if (arr.size() != groups->size()) {
            throw UsageError(fmt::format("config: subgroup '{}' has {} groups but {} member lists", spec.name,
                                         groups->size(), arr.size()));
        }
        MappingRule rule;
        for (std::size_t g = 0; g < arr.size(); ++g) {
            const auto* inner = arr[g].as_array();
            if (inner == nullptr) {
                throw UsageError(fmt::format("config: subgroup '{}' members must be lists of values", spec.name));
            }
            std::vector<std::string> values;
            for (const auto& v : *inner) {
                if (auto str = v.value_exact<std::string>()) {
                    values.push_back(*str);
                } else if (auto i = v.value_exact<std::int64_t>()) {
                    values.push_back(std::to_string(*i));
                } else {
                    throw UsageError(fmt::format("config: subgroup '{}' members must be strings", spec.name));
                }
            }
            rule.groups.emplace_back((*groups)[g], std::move(values));
        }
        spec.rule = std::move(rule);
    } else {
        spec.rule = IdentityRule{};
    }
    s.finish();
    return spec;
}

}  // namespace

void ExperimentConfig::validate() const
{
    if (data_path_text.empty()) {
        throw UsageError("config: [data] path is required");
    }
    if (schema.label_column.empty()) {
        throw UsageError("config: [data] label is required");
    }
    if (schema.numeric_features.empty() && schema.categorical_features.empty()) {
        throw UsageError("config: [data] lists no feature columns");
    }
    validate_settings();
}

void ExperimentConfig::validate_settings() const
{
    split.validate();
    train.validate();
    if (model.hidden.empty()) {
        throw UsageError("config: [model] hidden must list at least one layer width");
    }
    if (model.dropout.size() != model.hidden.size()) {
        throw UsageError("config: [model] dropout needs one rate per hidden layer");
    }
    if (prune.enabled) {
        prune.schedule.validate();
        if (prune.epochs < 1) {
            throw UsageError("config: [prune] epochs must be at least 1");
        }
    }
    if (quantize.enabled) {
        quantize.spec.validate();
    }
    if (experiment.runs < 1) {
        throw UsageError("config: [experiment] runs must be at least 1");
    }
    auto check_p = [](double p, const char* what) {
        if (!(p > 0.0 && p < 1.0)) {
            throw UsageError(fmt::format("config: {} must lie in (0, 1)", what));
        }
    };
    check_p(experiment.threshold, "threshold");
    check_p(validation_threshold(), "validation_threshold");
    check_p(experiment.label_threshold, "label_threshold");
    if (experiment.threads < 1) {
        throw UsageError("config: [experiment] threads must be at least 1");
    }
    std::set<std::string> names;
    for (const auto& s : subgroups) {
        if (!names.insert(s.name).second) {
            throw UsageError(fmt::format("config: duplicate subgroup name '{}'", s.name));
        }
    }
}

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir)
{
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        const auto& where = e.source().begin;
        throw UsageError(fmt::format("config: {} (line {}, column {})", e.description(), where.line, where.column));
    }
    static const std::set<std::string> kSections{"data", "subgroup", "split", "model", "train",
                                                 "prune", "quantize", "experiment"};
    for (const auto& [key, value] : root) {
        if (!kSections.contains(std::string(key.str()))) {
            throw UsageError(fmt::format("config: unknown section '{}'", key.str()));
        }
    }

    ExperimentConfig cfg;

    Section data(subtable(root, "data"), "data");
    cfg.data_path_text = data.get_or<std::string>("path", "");
    if (!cfg.data_path_text.empty()) {
        cfg.data_path = base_dir.empty() ? std::filesystem::path(cfg.data_path_text)
                                         : base_dir / cfg.data_path_text;
    }
    auto& schema = cfg.schema;
    schema.label_column = data.get_or<std::string>("label", "");
    schema.positive_label = data.get_or<std::string>("positive", "1");
    schema.negative_label = data.get_or<std::string>("negative", "0");
    schema.numeric_features = data.get_list<std::string>("numeric").value_or(std::vector<std::string>{});
    for (auto& c : data.get_list<std::string>("categorical").value_or(std::vector<std::string>{})) {
        schema.categorical_features.push_back({std::move(c), {}});
    }
    schema.id_column = data.get_or<std::string>("id", "");
    const auto delim = data.get_or<std::string>("delimiter", ",");
    if (delim.size() != 1) {
        throw UsageError("config: [data] delimiter must be a single character");
    }
    schema.delimiter = delim[0];
    if (const auto* keep = data.node("keep")) {
        if (!keep->is_table()) {
            throw UsageError("config: [data.keep] must be a table");
        }
        Section k(keep->as_table(), "data.keep");
        for (const auto& [key, value] : *keep->as_table()) {
            const std::string column(key.str());
            schema.filters.push_back({column, *k.get_list<std::string>(column)});
        }
        k.finish();
    }
    if (const auto* cats = data.node("categories")) {
        if (!cats->is_table()) {
            throw UsageError("config: [data.categories] must be a table");
        }
        Section k(cats->as_table(), "data.categories");
        for (auto& feature : schema.categorical_features) {
            feature.categories = k.get_list<std::string>(feature.column).value_or(std::vector<std::string>{});
        }
        k.finish();
    }
    data.finish();

    if (const auto* groups = root.get("subgroup")) {
        const auto* arr = groups->as_array();
        if (arr == nullptr) {
            throw UsageError("config: subgroups are declared as [[subgroup]] tables");
        }
        for (const auto& item : *arr) {
            if (!item.is_table()) {
                throw UsageError("config: subgroups are declared as [[subgroup]] tables");
            }
            Section s(item.as_table(), "subgroup");
            cfg.subgroups.push_back(read_subgroup(s));
        }
    }
    for (const auto& sg : cfg.subgroups) {
        if (std::find(schema.subgroup_columns.begin(), schema.subgroup_columns.end(), sg.source_column) ==
            schema.subgroup_columns.end()) {
            schema.subgroup_columns.push_back(sg.source_column);
        }
    }

    Section split(subtable(root, "split"), "split");
    cfg.split.train = split.get_or("train", cfg.split.train);
    cfg.split.validation = split.get_or("validation", cfg.split.validation);
    cfg.split.test = split.get_or("test", cfg.split.test);
    split.finish();

    Section model(subtable(root, "model"), "model");
    cfg.model.hidden = model.get_list<std::size_t>("hidden").value_or(cfg.model.hidden);
    if (auto d = model.get_list<double>("dropout")) {
        cfg.model.dropout = *d;
    } else if (cfg.model.dropout.size() != cfg.model.hidden.size()) {
        cfg.model.dropout.assign(cfg.model.hidden.size(), 0.0);
    }
    model.finish();

    Section train(subtable(root, "train"), "train");
    cfg.train.epochs = train.get_or("epochs", cfg.train.epochs);
    cfg.train.batch_size = train.get_or("batch_size", cfg.train.batch_size);
    cfg.train.learning_rate = train.get_or("learning_rate", cfg.train.learning_rate);
    cfg.train.beta1 = train.get_or("beta1", cfg.train.beta1);
    cfg.train.beta2 = train.get_or("beta2", cfg.train.beta2);
    cfg.train.epsilon = train.get_or("epsilon", cfg.train.epsilon);
    train.finish();

    Section prune(subtable(root, "prune"), "prune");
    auto& sched = cfg.prune.schedule;
    cfg.prune.enabled = prune.get_or("enabled", true);
    sched.initial_sparsity = prune.get_or("initial_sparsity", sched.initial_sparsity);
    sched.final_sparsity = prune.get_or("final_sparsity", sched.final_sparsity);
    sched.begin_step = prune.get_or("begin_step", sched.begin_step);
    if (auto end = prune.get<std::int64_t>("end_step")) {
        sched.end_step = *end;
        cfg.prune.end_step_set = true;
    }
    sched.power = prune.get_or("power", sched.power);
    sched.frequency = prune.get_or("frequency", sched.frequency);
    cfg.prune.epochs = prune.get_or("epochs", cfg.prune.epochs);
    prune.finish();

    Section quant(subtable(root, "quantize"), "quantize");
    cfg.quantize.enabled = quant.get_or("enabled", true);
    cfg.quantize.spec.bit_width = quant.get_or("bits", cfg.quantize.spec.bit_width);
    cfg.quantize.spec.fine_tune_epochs = quant.get_or("fine_tune_epochs", cfg.quantize.spec.fine_tune_epochs);
    cfg.quantize.spec.quantize_activations = quant.get_or("activations", cfg.quantize.spec.quantize_activations);
    quant.finish();

    Section exp(subtable(root, "experiment"), "experiment");
    auto& e = cfg.experiment;
    e.runs = exp.get_or("runs", e.runs);
    e.seed = exp.get_or("seed", e.seed);
    e.threshold = exp.get_or("threshold", e.threshold);
    e.validation_threshold = exp.get<double>("validation_threshold");
    e.yates = exp.get_or("yates", e.yates);
    e.label_threshold = exp.get_or("label_threshold", e.label_threshold);
    e.threads = exp.get_or("threads", e.threads);
    exp.finish();

    cfg.split.seed = e.seed;
    cfg.train.seed = e.seed;
    cfg.validate_settings();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw UsageError(fmt::format("cannot open config '{}'", path.string()));
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.parent_path());
}

}  // namespace faithgate
