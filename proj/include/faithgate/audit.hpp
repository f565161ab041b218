// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "faithgate/compress.hpp"
#include "faithgate/config.hpp"
#include "faithgate/datatab.hpp"
#include "faithgate/fairness.hpp"
#include "faithgate/metrics.hpp"
#include "faithgate/stat_test.hpp"

namespace faithgate {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kValidationTag = "val";
inline constexpr const char* kTestTag = "test";

enum class Verdict { Faithful, NotFaithful };

struct FaithfulnessVerdict {
    double p_value = 1.0;
    Verdict verdict = Verdict::Faithful;
    double threshold = 0.05;
};

// NotFaithful iff p <= threshold.
FaithfulnessVerdict judge(double p_value, double threshold);
const char* verdict_name(Verdict v);

struct PredictabilityOutcome {
    FaithfulnessVerdict val_verdict;
    FaithfulnessVerdict test_verdict;
    bool match() const { return val_verdict.verdict == test_verdict.verdict; }
};

struct PredictabilityScore {
    std::size_t correct = 0;
    std::size_t total = 0;
};

// Throws UsageError on an empty list.
PredictabilityScore predictability_score(std::span<const PredictabilityOutcome> outcomes);

// Paired predictions: one row per instance, split tag "val" or "test".
struct PredictionSet {
    std::vector<std::string> row_ids;
    std::vector<std::string> split;
    BinaryVector y_true;
    BinaryVector baseline;
    std::vector<std::string> variant_names;   // without the "pred_" prefix
    std::vector<BinaryVector> variants;
    std::vector<NamedColumn> subgroups;       // raw values

    std::size_t size() const { return row_ids.size(); }
    // Rows with the given split tag, in file order.
    std::vector<std::size_t> rows_with_split(const std::string& tag) const;
};

// Collects every schema problem; throws DataError listing them per row.
PredictionSet parse_prediction_set(const CsvTable& table);
PredictionSet read_prediction_set(const std::filesystem::path& path);
void write_prediction_set(std::ostream& out, const PredictionSet& preds);

// One model scored against the true labels on one split.
struct ModelEvaluation {
    std::string model;
    std::string split;
    ConfusionCounts counts;
    ClassificationMetrics metrics;
    std::vector<BiasReport> bias;  // one per demographic
};

struct SubgroupVerdicts {
    SubgroupAgreementResult result;
    std::vector<FaithfulnessVerdict> per_group;
    FaithfulnessVerdict combined;
    // combined test Faithful while some group is NotFaithful
    bool masked() const;
};

// A compressed variant compared against the baseline on one split.
struct VariantAgreement {
    std::string variant;
    std::string split;
    ConfusionCounts counts;  // baseline as reference
    ClassificationMetrics metrics;
    ContingencyTable table;
    ChiSquareResult chi;
    FaithfulnessVerdict verdict;
    std::vector<SubgroupVerdicts> subgroups;
};

struct SizeRecord {
    std::string model;
    SizeReport size;
};

struct RunRecord {
    std::size_t run = 0;
    std::uint64_t seed = 0;
    std::vector<ModelEvaluation> evaluations;
    std::vector<VariantAgreement> agreements;
    std::vector<SizeRecord> sizes;
    std::vector<double> layer_sparsity;  // pruned variant, per layer
    std::size_t train_rows = 0;
    std::size_t validation_rows = 0;
    std::size_t test_rows = 0;

    const ModelEvaluation* evaluation(const std::string& model, const std::string& split) const;
    const VariantAgreement* agreement(const std::string& variant, const std::string& split) const;
};

struct AuditReport {
    std::string source;  // "experiment" or "predictions"
    std::vector<std::string> models;    // baseline first
    std::vector<std::string> variants;  // compressed models
    std::vector<std::string> splits;    // "val" when present, then "test"
    std::vector<std::string> demographics;
    std::vector<std::vector<std::string>> demographic_groups;
    double threshold = 0.05;
    double validation_threshold = 0.05;
    bool yates = true;
    nlohmann::json settings = nlohmann::json::object();
    std::vector<RunRecord> runs;
    std::vector<std::string> notes;
};

struct EvaluationInputs {
    std::string split;
    BinaryVector y_true;
    BinaryVector baseline;
    std::vector<BinaryVector> variants;         // aligned with AuditReport::variants
    std::vector<GroupAssignment> demographics;  // aligned with AuditReport::demographics
};

// Truth metrics, bias, agreement and chi-squared verdicts for one split.
void evaluate_split(const AuditReport& layout, const EvaluationInputs& inputs, RunRecord& record);

// Pipeline stages shared by run_experiment and the CLI. `seed` is the run
// seed; every stage derives its own stream from it.
struct PreparedRun {
    Splits splits;
    Standardizer standardizer;
    Eigen::MatrixXd x_train;  // standardized
};
PreparedRun prepare_run(const ExperimentConfig& config, const Dataset& dataset, std::uint64_t seed);
MlpModel train_baseline(const ExperimentConfig& config, const PreparedRun& prepared, std::uint64_t seed);
QuantizeResult quantize_variant(const ExperimentConfig& config, const MlpModel& baseline,
                                const PreparedRun& prepared, std::uint64_t seed);
PruneResult prune_variant(const ExperimentConfig& config, const MlpModel& baseline, const PreparedRun& prepared,
                          std::uint64_t seed);
// The schedule actually used: end_step defaults to 3/4 of the fine-tuning steps.
PruneSchedule effective_schedule(const ExperimentConfig& config, std::size_t train_rows);

// The full protocol: for run i the seed is base + i; split, standardize,
// train, compress, predict, evaluate. Runs may execute on several threads;
// records are merged in run order.
AuditReport run_experiment(const ExperimentConfig& config);

// Metric battery over externally produced predictions (no training or sizes).
// Empty `specs` means one identity grouping per subgroup column.
AuditReport audit_predictions(const PredictionSet& preds, std::span<const SubgroupSpec> specs,
                              double threshold = 0.05, std::optional<double> validation_threshold = {},
                              bool yates = true);

// Schema-versioned, deterministic JSON: per-run records plus aggregates
// recomputed from them.
nlohmann::json report_to_json(const AuditReport& report);

// Flat plot-ready CSV files, keyed by file name.
std::vector<std::pair<std::string, std::string>> report_csv_files(const AuditReport& report);

// report.json, report.md and the CSV files.
void write_report(const AuditReport& report, const std::filesystem::path& out_dir);

}  // namespace faithgate
