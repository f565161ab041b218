// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#include "faithgate/audit.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>
#include <unordered_set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "faithgate/csv.hpp"
#include "faithgate/error.hpp"
#include "faithgate/nnet.hpp"
#include "faithgate/random.hpp"

namespace faithgate {

FaithfulnessVerdict judge(double p_value, double threshold)
{
    return {p_value, p_value <= threshold ? Verdict::NotFaithful : Verdict::Faithful, threshold};
}

const char* verdict_name(Verdict v)
{
    return v == Verdict::Faithful ? "Faithful" : "NotFaithful";
}

PredictabilityScore predictability_score(std::span<const PredictabilityOutcome> outcomes)
{
    if (outcomes.empty()) {
        throw UsageError("predictability_score needs at least one outcome");
    }
    PredictabilityScore score;
    score.total = outcomes.size();
    score.correct = static_cast<std::size_t>(
        std::count_if(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.match(); }));
    return score;
}

bool SubgroupVerdicts::masked() const
{
    return combined.verdict == Verdict::Faithful &&
           std::any_of(per_group.begin(), per_group.end(),
                       [](const auto& v) { return v.verdict == Verdict::NotFaithful; });
}

std::vector<std::size_t> PredictionSet::rows_with_split(const std::string& tag) const
{
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < split.size(); ++i) {
        if (split[i] == tag) {
            rows.push_back(i);
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// PredictionSet interchange

namespace {

constexpr std::size_t kMaxListedProblems = 50;

std::optional<std::uint8_t> parse_bit(const std::string& cell)
{
    if (cell == "0") {
        return 0;
    }
    if (cell == "1") {
        return 1;
    }
    return std::nullopt;
}

}  // namespace

PredictionSet parse_prediction_set(const CsvTable& table)
{
    const auto& h = table.header;
    static const std::vector<std::string> kFixed{"row_id", "split", "y_true", "pred_baseline"};
    if (h.size() < kFixed.size() || !std::equal(kFixed.begin(), kFixed.end(), h.begin())) {
        throw DataError("prediction set header must start with row_id,split,y_true,pred_baseline");
    }
    PredictionSet ps;
    std::size_t first_subgroup = kFixed.size();
    while (first_subgroup < h.size() && h[first_subgroup].starts_with("pred_")) {
        const auto name = h[first_subgroup].substr(5);
        if (name.empty() || name == "baseline") {
            throw DataError(fmt::format("prediction set column '{}' is not a valid variant name", h[first_subgroup]));
        }
        ps.variant_names.push_back(name);
        ++first_subgroup;
    }
    std::set<std::string> seen(h.begin(), h.end());
    if (seen.size() != h.size()) {
        throw DataError("prediction set header repeats a column name");
    }
    for (std::size_t c = first_subgroup; c < h.size(); ++c) {
        if (h[c].starts_with("pred_")) {
            throw DataError(fmt::format("prediction column '{}' must come before the subgroup columns", h[c]));
        }
        ps.subgroups.push_back({h[c], {}});
    }
    ps.variants.resize(ps.variant_names.size());

    std::vector<std::string> problems;
    std::unordered_set<std::string> ids;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = r < table.line_numbers.size() ? table.line_numbers[r] : r + 2;
        const std::string& id = row[0];
        const std::string where =
            id.empty() ? fmt::format("line {}", line) : fmt::format("row '{}' (line {})", id, line);
        if (id.empty()) {
            problems.push_back(fmt::format("{}: empty row_id", where));
        } else if (!ids.insert(id).second) {
            problems.push_back(fmt::format("{}: duplicate row_id", where));
        }
        if (row[1] != kValidationTag && row[1] != kTestTag) {
            problems.push_back(row[1].empty()
                                   ? fmt::format("{}: missing split tag", where)
                                   : fmt::format("{}: split tag '{}' is not 'val' or 'test'", where, row[1]));
        }
        auto bit = [&](std::size_t col) -> std::uint8_t {
            const auto v = parse_bit(row[col]);
            if (!v) {
                problems.push_back(fmt::format("{}: {} = '{}' is not 0 or 1", where, h[col], row[col]));
                return 0;
            }
            return *v;
        };
        ps.row_ids.push_back(id);
        ps.split.push_back(row[1]);
        ps.y_true.push_back(bit(2));
        ps.baseline.push_back(bit(3));
        for (std::size_t v = 0; v < ps.variants.size(); ++v) {
            ps.variants[v].push_back(bit(4 + v));
        }
        for (std::size_t s = 0; s < ps.subgroups.size(); ++s) {
            const auto& cell = row[first_subgroup + s];
            if (cell.empty()) {
                problems.push_back(fmt::format("{}: empty value for subgroup '{}'", where, h[first_subgroup + s]));
            }
            ps.subgroups[s].values.push_back(cell);
        }
    }
    if (!problems.empty()) {
        std::string msg = fmt::format("prediction set has {} problem(s):", problems.size());
        for (std::size_t i = 0; i < std::min(problems.size(), kMaxListedProblems); ++i) {
            msg += "\n  " + problems[i];
        }
        if (problems.size() > kMaxListedProblems) {
            msg += fmt::format("\n  ... and {} more", problems.size() - kMaxListedProblems);
        }
        throw DataError(msg);
    }
    return ps;
}

PredictionSet read_prediction_set(const std::filesystem::path& path)
{
    return parse_prediction_set(read_csv(path));
}

void write_prediction_set(std::ostream& out, const PredictionSet& preds)
{
    std::vector<std::string> header{"row_id", "split", "y_true", "pred_baseline"};
    for (const auto& v : preds.variant_names) {
        header.push_back("pred_" + v);
    }
    for (const auto& s : preds.subgroups) {
        header.push_back(s.name);
    }
    write_csv_row(out, header);
    std::vector<std::string> cells;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        cells.clear();
        cells.push_back(preds.row_ids[i]);
        cells.push_back(preds.split[i]);
        cells.push_back(std::to_string(preds.y_true[i]));
        cells.push_back(std::to_string(preds.baseline[i]));
        for (const auto& v : preds.variants) {
            cells.push_back(std::to_string(v[i]));
        }
        for (const auto& s : preds.subgroups) {
            cells.push_back(s.values[i]);
        }
        write_csv_row(out, cells);
    }
}

// ---------------------------------------------------------------------------
// Evaluation

const ModelEvaluation* RunRecord::evaluation(const std::string& model, const std::string& split) const
{
    for (const auto& e : evaluations) {
        if (e.model == model && e.split == split) {
            return &e;
        }
    }
    return nullptr;
}

const VariantAgreement* RunRecord::agreement(const std::string& variant, const std::string& split) const
{
    for (const auto& a : agreements) {
        if (a.variant == variant && a.split == split) {
            return &a;
        }
    }
    return nullptr;
}

namespace {

GroupAssignment restrict_to(const GroupAssignment& full, std::span<const std::size_t> rows)
{
    GroupAssignment out;
    out.name = full.name;
    out.groups = full.groups;
    out.membership.reserve(rows.size());
    for (auto r : rows) {
        out.membership.push_back(full.membership[r]);
    }
    return out;
}

BinaryVector pick(const BinaryVector& v, std::span<const std::size_t> rows)
{
    BinaryVector out;
    out.reserve(rows.size());
    for (auto r : rows) {
        out.push_back(v[r]);
    }
    return out;
}

}  // namespace

void evaluate_split(const AuditReport& layout, const EvaluationInputs& in, RunRecord& record)
{
    if (in.variants.size() != layout.variants.size() || in.demographics.size() != layout.demographics.size()) {
        throw UsageError("evaluate_split: inputs do not match the report layout");
    }
    const double threshold = in.split == kValidationTag ? layout.validation_threshold : layout.threshold;

    auto score = [&](const std::string& model, const BinaryVector& preds) {
        ModelEvaluation e;
        e.model = model;
        e.split = in.split;
        e.counts = confusion(in.y_true, preds);
        e.metrics = classification_metrics(e.counts);
        for (const auto& demo : in.demographics) {
            e.bias.push_back(bias_report(in.y_true, preds, demo));
        }
        record.evaluations.push_back(std::move(e));
    };
    score(layout.models.front(), in.baseline);
    for (std::size_t v = 0; v < in.variants.size(); ++v) {
        score(layout.variants[v], in.variants[v]);
    }

    for (std::size_t v = 0; v < in.variants.size(); ++v) {
        VariantAgreement a;
        a.variant = layout.variants[v];
        a.split = in.split;
        a.counts = confusion(in.baseline, in.variants[v]);
        a.metrics = classification_metrics(a.counts);
        a.table = class_distribution_table(in.baseline, in.variants[v], a.variant);
        try {
            a.chi = chi_square(a.table, layout.yates);
        } catch (const StatError& e) {
            throw StatError(fmt::format("{} vs baseline on '{}': {}", a.variant, in.split, e.what()));
        }
        a.verdict = judge(a.chi.p_value, threshold);
        for (const auto& demo : in.demographics) {
            SubgroupVerdicts sv;
            sv.result = subgroup_agreement(in.baseline, in.variants[v], demo, layout.yates, a.variant);
            for (const auto& g : sv.result.per_group) {
                sv.per_group.push_back(judge(g.result.p_value, threshold));
            }
            sv.combined = judge(sv.result.combined.p_value, threshold);
            if (sv.masked()) {
                spdlog::info("run {}: {} on '{}': combined {} test hides a significant subgroup", record.run,
                             a.variant, in.split, demo.name);
            }
            a.subgroups.push_back(std::move(sv));
        }
        record.agreements.push_back(std::move(a));
    }
}

// ---------------------------------------------------------------------------
// Experiment

PreparedRun prepare_run(const ExperimentConfig& cfg, const Dataset& dataset, std::uint64_t seed)
{
    SplitSpec spec = cfg.split;
    spec.seed = derive_seed(seed, "split");
    PreparedRun out{stratified_split(dataset, spec), {}, {}};
    out.standardizer = fit_standardizer(out.splits.train);
    out.x_train = out.standardizer.transform(out.splits.train.features);
    return out;
}

MlpModel train_baseline(const ExperimentConfig& cfg, const PreparedRun& prepared, std::uint64_t seed)
{
    auto model = make_mlp(static_cast<std::size_t>(prepared.x_train.cols()), cfg.model.hidden, cfg.model.dropout,
                          derive_seed(seed, "init"));
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(seed, "train");
    return train(std::move(model), prepared.x_train, prepared.splits.train.labels, tc).model;
}

QuantizeResult quantize_variant(const ExperimentConfig& cfg, const MlpModel& baseline, const PreparedRun& prepared,
                                std::uint64_t seed)
{
    TrainConfig tc = cfg.train;
    tc.epochs = cfg.quantize.spec.fine_tune_epochs;
    tc.seed = derive_seed(seed, "quantize");
    return quantize(baseline, cfg.quantize.spec, tc, prepared.x_train, prepared.splits.train.labels);
}

PruneSchedule effective_schedule(const ExperimentConfig& cfg, std::size_t train_rows)
{
    PruneSchedule schedule = cfg.prune.schedule;
    if (!cfg.prune.end_step_set) {
        const auto total = static_cast<std::int64_t>(cfg.prune.epochs) * steps_per_epoch(train_rows, cfg.train.batch_size);
        schedule.end_step = std::max(schedule.begin_step + 1, total * 3 / 4);
    }
    return schedule;
}

PruneResult prune_variant(const ExperimentConfig& cfg, const MlpModel& baseline, const PreparedRun& prepared,
                          std::uint64_t seed)
{
    TrainConfig tc = cfg.train;
    tc.epochs = cfg.prune.epochs;
    tc.seed = derive_seed(seed, "prune");
    return prune(baseline, effective_schedule(cfg, prepared.splits.train.size()), tc, prepared.x_train,
                 prepared.splits.train.labels);
}

namespace {

template <typename F>
auto staged(std::size_t run, std::uint64_t seed, const char* stage, F&& fn)
{
    const auto context = [&](const std::exception& e) {
        return fmt::format("run {} (seed {}), stage {}: {}", run, seed, stage, e.what());
    };
    try {
        return fn();
    } catch (const UsageError& e) {
        throw UsageError(context(e));
    } catch (const DataError& e) {
        throw DataError(context(e));
    } catch (const StatError& e) {
        throw StatError(context(e));
    } catch (const Error& e) {
        throw Error(context(e));
    }
}

struct PreparedData {
    Dataset dataset;
    std::vector<GroupAssignment> groups;  // over the full dataset
};

RunRecord run_once(const ExperimentConfig& cfg, const AuditReport& layout, const PreparedData& data,
                   std::size_t run)
{
    const std::uint64_t seed = cfg.experiment.seed + run;
    RunRecord record;
    record.run = run;
    record.seed = seed;

    const auto prepared = staged(run, seed, "split", [&] { return prepare_run(cfg, data.dataset, seed); });
    const auto& splits = prepared.splits;
    const auto& standardizer = prepared.standardizer;
    record.train_rows = splits.train.size();
    record.validation_rows = splits.validation ? splits.validation->size() : 0;
    record.test_rows = splits.test.size();

    const MlpModel baseline = staged(run, seed, "train", [&] { return train_baseline(cfg, prepared, seed); });
    record.sizes.push_back({"baseline", size_report(baseline)});

    std::vector<MlpModel> variants;
    for (const auto& name : layout.variants) {
        if (name == "quantized") {
            auto result = staged(run, seed, "quantize", [&] { return quantize_variant(cfg, baseline, prepared, seed); });
            record.sizes.push_back({name, size_report(result.tensors)});
            variants.push_back(std::move(result.model));
        } else {
            auto result = staged(run, seed, "prune", [&] { return prune_variant(cfg, baseline, prepared, seed); });
            record.sizes.push_back({name, size_report(result.model)});
            record.layer_sparsity = result.layer_sparsity;
            variants.push_back(std::move(result.model));
        }
    }

    staged(run, seed, "evaluate", [&] {
        auto one = [&](const std::string& tag, const Dataset& part, std::span<const std::size_t> rows) {
            EvaluationInputs in;
            in.split = tag;
            in.y_true = part.labels;
            const Eigen::MatrixXd x = standardizer.transform(part.features);
            const double thr = cfg.experiment.label_threshold;
            in.baseline = predict_labels(baseline, x, thr);
            for (const auto& m : variants) {
                in.variants.push_back(predict_labels(m, x, thr));
            }
            for (const auto& g : data.groups) {
                in.demographics.push_back(restrict_to(g, rows));
            }
            evaluate_split(layout, in, record);
        };
        if (splits.validation) {
            one(kValidationTag, *splits.validation, splits.validation_rows);
        }
        one(kTestTag, splits.test, splits.test_rows);
        return 0;
    });
    return record;
}

}  // namespace

AuditReport run_experiment(const ExperimentConfig& cfg)
{
    cfg.validate();
    auto loaded = load_csv(cfg.data_path, cfg.schema);
    if (loaded.dropped_rows > 0) {
        spdlog::info("dropped {} row(s) with missing values", loaded.dropped_rows);
    }
    PreparedData data{std::move(loaded.dataset), {}};
    data.groups = derive_subgroups(data.dataset, cfg.subgroups);

    AuditReport report;
    report.source = "experiment";
    report.models = {"baseline"};
    if (cfg.quantize.enabled) {
        report.variants.push_back("quantized");
    }
    if (cfg.prune.enabled) {
        report.variants.push_back("pruned");
    }
    report.models.insert(report.models.end(), report.variants.begin(), report.variants.end());
    if (cfg.split.validation > 0.0) {
        report.splits.push_back(kValidationTag);
    }
    report.splits.push_back(kTestTag);
    for (const auto& g : data.groups) {
        report.demographics.push_back(g.name);
        report.demographic_groups.push_back(g.groups);
    }
    report.threshold = cfg.experiment.threshold;
    report.validation_threshold = cfg.validation_threshold();
    report.yates = cfg.experiment.yates;

    const auto& s = cfg.prune.schedule;
    report.settings = {
        {"data", cfg.data_path_text},
        {"rows", data.dataset.size()},
        {"dropped_rows", loaded.dropped_rows},
        {"filtered_rows", loaded.filtered_rows},
        {"features", data.dataset.feature_names},
        {"runs", cfg.experiment.runs},
        {"base_seed", cfg.experiment.seed},
        {"label_threshold", cfg.experiment.label_threshold},
        {"split", {{"train", cfg.split.train}, {"validation", cfg.split.validation}, {"test", cfg.split.test}}},
        {"model", {{"hidden", cfg.model.hidden}, {"dropout", cfg.model.dropout}}},
        {"train",
         {{"epochs", cfg.train.epochs},
          {"batch_size", cfg.train.batch_size},
          {"learning_rate", cfg.train.learning_rate}}},
    };
    if (cfg.prune.enabled) {
        report.settings["prune"] = {{"initial_sparsity", s.initial_sparsity},
                                    {"final_sparsity", s.final_sparsity},
                                    {"power", s.power},
                                    {"frequency", s.frequency},
                                    {"epochs", cfg.prune.epochs}};
    }
    if (cfg.quantize.enabled) {
        report.settings["quantize"] = {{"bits", cfg.quantize.spec.bit_width},
                                       {"fine_tune_epochs", cfg.quantize.spec.fine_tune_epochs},
                                       {"activations", cfg.quantize.spec.quantize_activations}};
    }

    const auto runs = static_cast<std::size_t>(cfg.experiment.runs);
    std::vector<std::optional<RunRecord>> records(runs);
    std::vector<std::exception_ptr> failures(runs);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < runs; i = next++) {
            try {
                spdlog::debug("run {} started", i);
                records[i] = run_once(cfg, report, data, i);
            } catch (...) {
                failures[i] = std::current_exception();
            }
        }
    };
    const auto threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.experiment.threads), runs);
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    for (std::size_t i = 0; i < runs; ++i) {
        if (failures[i]) {
            std::rethrow_exception(failures[i]);
        }
        report.runs.push_back(std::move(*records[i]));
    }
    return report;
}

AuditReport audit_predictions(const PredictionSet& preds, std::span<const SubgroupSpec> specs, double threshold,
                              std::optional<double> validation_threshold, bool yates)
{
    if (preds.size() == 0) {
        throw DataError("prediction set has no rows");
    }
    for (double p : {threshold, validation_threshold.value_or(threshold)}) {
        if (!(p > 0.0 && p < 1.0)) {
            throw UsageError("significance threshold must lie in (0, 1)");
        }
    }
    AuditReport report;
    report.source = "predictions";
    report.models = {"baseline"};
    report.variants = preds.variant_names;
    report.models.insert(report.models.end(), report.variants.begin(), report.variants.end());
    report.threshold = threshold;
    report.validation_threshold = validation_threshold.value_or(threshold);
    report.yates = yates;
    report.settings = {{"rows", preds.size()}};

    std::vector<SubgroupSpec> used(specs.begin(), specs.end());
    if (used.empty()) {
        for (const auto& col : preds.subgroups) {
            used.push_back({col.name, col.name, IdentityRule{}});
        }
    }
    std::vector<GroupAssignment> groups;
    for (const auto& spec : used) {
        const auto it = std::find_if(preds.subgroups.begin(), preds.subgroups.end(),
                                     [&](const auto& c) { return c.name == spec.source_column; });
        if (it == preds.subgroups.end()) {
            throw DataError(fmt::format("subgroup '{}' needs column '{}', which the prediction set lacks", spec.name,
                                        spec.source_column));
        }
        groups.push_back(assign_groups(it->values, spec));
        report.demographics.push_back(spec.name);
        report.demographic_groups.push_back(groups.back().groups);
    }

    RunRecord record;
    for (const char* tag : {kValidationTag, kTestTag}) {
        const auto rows = preds.rows_with_split(tag);
        if (rows.empty()) {
            continue;
        }
        report.splits.push_back(tag);
        EvaluationInputs in;
        in.split = tag;
        in.y_true = pick(preds.y_true, rows);
        in.baseline = pick(preds.baseline, rows);
        for (const auto& v : preds.variants) {
            in.variants.push_back(pick(v, rows));
        }
        for (const auto& g : groups) {
            in.demographics.push_back(restrict_to(g, rows));
        }
        (std::string(tag) == kValidationTag ? record.validation_rows : record.test_rows) = rows.size();
        evaluate_split(report, in, record);
    }
    report.runs.push_back(std::move(record));
    return report;
}

}  // namespace faithgate
