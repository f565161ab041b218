// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#include "faithgate/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "faithgate/audit.hpp"
#include "faithgate/checkpoint.hpp"
#include "faithgate/config.hpp"
#include "faithgate/error.hpp"
#include "faithgate/report.hpp"
#include "faithgate/stat_test.hpp"
#include "faithgate/synth.hpp"

namespace faithgate {

void configure_logging()
{
    static auto logger = [] {
        auto l = spdlog::stderr_color_mt("faithgate");
        spdlog::set_default_logger(l);
        return l;
    }();
    logger->set_level(spdlog::level::warn);
    if (const char* env = std::getenv("FAITHGATE_LOG")) {
        const auto level = spdlog::level::from_str(env);
        // from_str maps unknown names to "off"
        if (level == spdlog::level::off && std::string_view(env) != "off") {
            spdlog::warn("FAITHGATE_LOG='{}' is not a log level; keeping 'warn'", env);
        } else {
            logger->set_level(level);
        }
    }
}

namespace {

struct Options {
    std::string config;
    std::string out;
    std::string preds;
    std::string model;
    std::string method;
    std::string table;
    std::string shape;
    std::vector<std::string> variants;
    std::optional<std::uint64_t> seed;
    std::optional<int> runs;
    std::optional<double> threshold;
    std::size_t rows = 5000;
    bool no_yates = false;
};

std::ofstream open_output(const std::string& path)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw UsageError(fmt::format("cannot write '{}'", path));
    }
    return f;
}

ExperimentConfig config_with_overrides(const Options& o, bool need_data)
{
    ExperimentConfig cfg = load_config(o.config);
    if (o.seed) {
        cfg.experiment.seed = *o.seed;
    }
    if (o.runs) {
        cfg.experiment.runs = *o.runs;
    }
    if (o.threshold) {
        cfg.experiment.threshold = *o.threshold;
    }
    if (o.no_yates) {
        cfg.experiment.yates = false;
    }
    if (need_data) {
        cfg.validate();
    } else {
        cfg.validate_settings();
    }
    return cfg;
}

Dataset load_dataset(const ExperimentConfig& cfg)
{
    auto loaded = load_csv(cfg.data_path, cfg.schema);
    if (loaded.dropped_rows > 0) {
        spdlog::info("dropped {} row(s) with missing values", loaded.dropped_rows);
    }
    return std::move(loaded.dataset);
}

void check_threshold(double p)
{
    if (!(p > 0.0 && p < 1.0)) {
        throw UsageError("--threshold must lie in (0, 1)");
    }
}

// ---------------------------------------------------------------------------

int cmd_synth(const Options& o, std::ostream&)
{
    if (o.rows == 0) {
        throw UsageError("--rows must be positive");
    }
    auto f = open_output(o.out);
    write_synthetic_dataset(f, o.rows, o.seed.value_or(7));
    return 0;
}

int cmd_split(const Options& o, std::ostream&)
{
    const auto cfg = config_with_overrides(o, true);
    const auto ds = load_dataset(cfg);
    SplitSpec spec = cfg.split;
    spec.seed = derive_seed(cfg.experiment.seed, "split");
    const auto splits = stratified_split(ds, spec);
    std::vector<std::string> tag(ds.size());
    for (auto r : splits.train_rows) {
        tag[r] = "train";
    }
    for (auto r : splits.validation_rows) {
        tag[r] = kValidationTag;
    }
    for (auto r : splits.test_rows) {
        tag[r] = kTestTag;
    }
    auto f = open_output(o.out);
    write_csv_row(f, {"row_id", "split", "label"});
    for (std::size_t i = 0; i < ds.size(); ++i) {
        write_csv_row(f, {ds.row_ids[i], tag[i], std::to_string(ds.labels[i])});
    }
    return 0;
}

int cmd_train(const Options& o, std::ostream&)
{
    const auto cfg = config_with_overrides(o, true);
    const auto ds = load_dataset(cfg);
    const std::uint64_t seed = cfg.experiment.seed;
    const auto prepared = prepare_run(cfg, ds, seed);
    ModelCheckpoint ckpt;
    ckpt.model = train_baseline(cfg, prepared, seed);
    ckpt.feature_names = ds.feature_names;
    ckpt.standardizer = prepared.standardizer;
    ckpt.compression.seed = seed;
    save_checkpoint(o.out, ckpt);
    return 0;
}

int cmd_compress(const Options& o, std::ostream&)
{
    const auto cfg = config_with_overrides(o, true);
    const auto base = load_checkpoint(o.model);
    if (base.compression.method != "none") {
        throw UsageError(fmt::format("'{}' is already compressed ({})", o.model, base.compression.method));
    }
    const auto ds = load_dataset(cfg);
    const std::uint64_t seed = o.seed.value_or(base.compression.seed);
    const auto prepared = prepare_run(cfg, ds, seed);
    if (!base.standardizer || base.standardizer->mean != prepared.standardizer.mean) {
        throw DataError("the model was not trained on this configuration's training split (check --seed)");
    }
    ModelCheckpoint out = base;
    out.compression.seed = seed;
    if (o.method == "quantize") {
        auto r = quantize_variant(cfg, base.model, prepared, seed);
        out.model = std::move(r.model);
        out.compression.method = "quantize";
        out.compression.tensors = std::move(r.tensors);
        out.compression.settings = {{"bits", cfg.quantize.spec.bit_width},
                                    {"fine_tune_epochs", cfg.quantize.spec.fine_tune_epochs},
                                    {"activations", cfg.quantize.spec.quantize_activations}};
    } else {
        const auto schedule = effective_schedule(cfg, prepared.splits.train.size());
        auto r = prune_variant(cfg, base.model, prepared, seed);
        out.model = std::move(r.model);
        out.compression.method = "prune";
        out.compression.masks = std::move(r.masks);
        out.compression.settings = {{"initial_sparsity", schedule.initial_sparsity},
                                    {"final_sparsity", schedule.final_sparsity},
                                    {"begin_step", schedule.begin_step},
                                    {"end_step", schedule.end_step},
                                    {"power", schedule.power},
                                    {"frequency", schedule.frequency},
                                    {"epochs", cfg.prune.epochs},
                                    {"layer_sparsity", r.layer_sparsity}};
    }
    save_checkpoint(o.out, out);
    return 0;
}

int cmd_predict(const Options& o, std::ostream&)
{
    const auto cfg = config_with_overrides(o, true);
    const auto base = load_checkpoint(o.model);
    std::vector<std::pair<std::string, ModelCheckpoint>> variants;
    for (const auto& spec : o.variants) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
            throw UsageError(fmt::format("--variant expects name=path, got '{}'", spec));
        }
        variants.emplace_back(spec.substr(0, eq), load_checkpoint(spec.substr(eq + 1)));
    }
    const auto ds = load_dataset(cfg);
    for (const auto* c : {&base}) {
        if (c->feature_names != ds.feature_names) {
            throw DataError("the model's feature columns do not match the configured dataset");
        }
    }
    for (const auto& [name, c] : variants) {
        if (c.model.input_width() != base.model.input_width()) {
            throw DataError(fmt::format("variant '{}' expects {} features, the baseline {}", name,
                                        c.model.input_width(), base.model.input_width()));
        }
    }
    if (!base.standardizer) {
        throw DataError("the baseline checkpoint has no standardizer");
    }
    const std::uint64_t seed = o.seed.value_or(base.compression.seed);
    SplitSpec spec = cfg.split;
    spec.seed = derive_seed(seed, "split");
    const auto splits = stratified_split(ds, spec);

    PredictionSet ps;
    for (const auto& [name, c] : variants) {
        ps.variant_names.push_back(name);
    }
    ps.variants.resize(variants.size());
    for (const auto& col : cfg.schema.subgroup_columns) {
        ps.subgroups.push_back({col, {}});
    }
    const double thr = cfg.experiment.label_threshold;
    auto emit = [&](const char* tag, const Dataset& part) {
        const Eigen::MatrixXd x = base.standardizer->transform(part.features);
        const auto b = predict_labels(base.model, x, thr);
        std::vector<BinaryVector> v;
        for (const auto& [name, c] : variants) {
            v.push_back(predict_labels(c.model, x, thr));
        }
        for (std::size_t i = 0; i < part.size(); ++i) {
            ps.row_ids.push_back(part.row_ids[i]);
            ps.split.push_back(tag);
            ps.y_true.push_back(part.labels[i]);
            ps.baseline.push_back(b[i]);
            for (std::size_t k = 0; k < v.size(); ++k) {
                ps.variants[k].push_back(v[k][i]);
            }
            for (auto& col : ps.subgroups) {
                col.values.push_back(part.subgroup_column(col.name)[i]);
            }
        }
    };
    if (splits.validation) {
        emit(kValidationTag, *splits.validation);
    }
    emit(kTestTag, splits.test);
    auto f = open_output(o.out);
    write_prediction_set(f, ps);
    return 0;
}

struct AuditSettings {
    std::vector<SubgroupSpec> subgroups;
    double threshold = 0.05;
    std::optional<double> validation_threshold;
    bool yates = true;
};

AuditSettings audit_settings(const Options& o)
{
    AuditSettings s;
    if (!o.config.empty()) {
        const auto cfg = config_with_overrides(o, false);
        s.subgroups = cfg.subgroups;
        s.threshold = cfg.experiment.threshold;
        s.validation_threshold = cfg.experiment.validation_threshold;
        s.yates = cfg.experiment.yates;
    } else {
        s.threshold = o.threshold.value_or(0.05);
        s.yates = !o.no_yates;
    }
    check_threshold(s.threshold);
    return s;
}

AuditReport audit_from_flags(const Options& o)
{
    const auto s = audit_settings(o);
    const auto preds = read_prediction_set(o.preds);
    return audit_predictions(preds, s.subgroups, s.threshold, s.validation_threshold, s.yates);
}

std::string p_text(double p)
{
    return fmt::format("{:.6g}", p);
}

int cmd_agree(const Options& o, std::ostream& out)
{
    const auto report = audit_from_flags(o);
    const auto& run = report.runs.front();
    out << fmt::format("{:<12} {:<5} {:>9} {:>9} {:>9} {:>9} {:>11} {:>4} {:>11}  {}\n", "variant", "split",
                       "accuracy", "precision", "recall", "f1", "chi2", "dof", "p", "verdict");
    for (const auto& a : run.agreements) {
        out << fmt::format("{:<12} {:<5} {:>9.4f} {:>9.4f} {:>9.4f} {:>9.4f} {:>11.6g} {:>4} {:>11}  {}\n", a.variant,
                           a.split, a.metrics.accuracy, a.metrics.precision, a.metrics.recall, a.metrics.f1,
                           a.chi.statistic, a.chi.dof, p_text(a.chi.p_value), verdict_name(a.verdict.verdict));
    }
    return 0;
}

int cmd_bias(const Options& o, std::ostream& out)
{
    const auto report = audit_from_flags(o);
    if (report.demographics.empty()) {
        throw DataError("the prediction set has no subgroup columns");
    }
    out << fmt::format("{:<12} {:<5} {:<16} {:>8}  {}\n", "model", "split", "demographic", "bias", "groups");
    for (const auto& e : report.runs.front().evaluations) {
        for (const auto& b : e.bias) {
            std::string groups;
            for (const auto& g : b.group_rates) {
                const auto rate = [](const std::optional<double>& r) {
                    return r ? fmt::format("{:.3f}", *r) : std::string("undefined");
                };
                groups += fmt::format("{}{}: sens {} spec {} (n={})", groups.empty() ? "" : "; ", g.group_label,
                                      rate(g.sensitivity), rate(g.specificity), g.support);
            }
            out << fmt::format("{:<12} {:<5} {:<16} {:>8}  {}\n", e.model, e.split, b.demographic,
                               b.bias ? fmt::format("{:.4f}", *b.bias) : "n/a", groups);
        }
    }
    return 0;
}

std::vector<std::int64_t> parse_counts(const std::string& text)
{
    std::vector<std::int64_t> counts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto t = trim(item);
        std::size_t used = 0;
        long long v = -1;
        try {
            v = std::stoll(t, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (t.empty() || used != t.size() || v < 0) {
            throw UsageError(fmt::format("--table: '{}' is not a non-negative integer count", t));
        }
        counts.push_back(v);
    }
    return counts;
}

int cmd_chi2(const Options& o, std::ostream& out)
{
    const auto x = o.shape.find_first_of("xX");
    std::size_t rows = 0;
    std::size_t cols = 0;
    try {
        if (x == std::string::npos) {
            throw std::invalid_argument("shape");
        }
        std::size_t used = 0;
        rows = std::stoul(o.shape.substr(0, x), &used);
        if (used != x) {
            throw std::invalid_argument("shape");
        }
        cols = std::stoul(o.shape.substr(x + 1), &used);
        if (used != o.shape.size() - x - 1) {
            throw std::invalid_argument("shape");
        }
    } catch (const std::exception&) {
        throw UsageError(fmt::format("--shape expects RxC, got '{}'", o.shape));
    }
    auto counts = parse_counts(o.table);
    if (counts.size() != rows * cols) {
        throw UsageError(fmt::format("--table has {} counts but --shape {} needs {}", counts.size(), o.shape,
                                     rows * cols));
    }
    const double threshold = o.threshold.value_or(0.05);
    check_threshold(threshold);
    const ContingencyTable table(rows, cols, std::move(counts));
    const auto r = chi_square(table, !o.no_yates);
    const auto v = judge(r.p_value, threshold);
    out << fmt::format("statistic {}\n", r.statistic);
    out << fmt::format("dof {}\n", r.dof);
    out << fmt::format("p_value {}\n", r.p_value);
    out << fmt::format("yates {}\n", r.correction_applied ? "applied" : "not applied");
    out << fmt::format("verdict {} (threshold {})\n", verdict_name(v.verdict), threshold);
    return 0;
}

int cmd_audit(const Options& o, std::ostream& out)
{
    const auto report = audit_from_flags(o);
    std::size_t tests = 0;
    std::size_t flagged = 0;
    auto count = [&](const FaithfulnessVerdict& v) {
        ++tests;
        flagged += v.verdict == Verdict::NotFaithful ? 1 : 0;
    };
    for (const auto& a : report.runs.front().agreements) {
        count(a.verdict);
        out << fmt::format("{} ({} split): agreement accuracy {:.3f}, p = {} -> {}\n", a.variant, a.split,
                           a.metrics.accuracy, p_text(a.chi.p_value), verdict_name(a.verdict.verdict));
        for (const auto& s : a.subgroups) {
            count(s.combined);
            std::string line = fmt::format("  {}: combined p = {} -> {}", s.result.demographic,
                                           p_text(s.result.combined.p_value), verdict_name(s.combined.verdict));
            for (std::size_t g = 0; g < s.per_group.size(); ++g) {
                count(s.per_group[g]);
                line += fmt::format("; {} p = {} -> {}", s.result.per_group[g].group_label,
                                    p_text(s.per_group[g].p_value), verdict_name(s.per_group[g].verdict));
            }
            if (s.masked()) {
                line += " (combined test masks a significant group)";
            }
            out << line << "\n";
        }
    }
    if (flagged == 0) {
        out << fmt::format("Summary: Faithful ({} of {} tests below threshold)\n", flagged, tests);
    } else {
        out << fmt::format("Summary: NotFaithful ({} of {} tests below threshold)\n", flagged, tests);
    }
    if (!o.out.empty()) {
        write_report(report, o.out);
    }
    return 0;
}

int cmd_experiment(const Options& o, std::ostream& out)
{
    const auto cfg = config_with_overrides(o, true);
    const auto report = run_experiment(cfg);
    write_report(report, o.out);
    out << fmt::format("wrote {} run(s) to {}\n", report.runs.size(), o.out);
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Audit how faithfully a compressed binary classifier follows its baseline.", "faithgate"};
    app.require_subcommand(1, 1);
    app.failure_message(CLI::FailureMessage::help);
    Options o;

    auto add_config = [&](CLI::App* sc, bool required) {
        auto* opt = sc->add_option("--config", o.config, "Experiment configuration (TOML)")->check(CLI::ExistingFile);
        if (required) {
            opt->required();
        }
    };
    auto add_seed = [&](CLI::App* sc) { sc->add_option("--seed", o.seed, "Seed override"); };
    auto add_stats = [&](CLI::App* sc) {
        sc->add_option("--threshold", o.threshold, "Significance threshold (default 0.05)");
        sc->add_flag("--no-yates", o.no_yates, "Disable the Yates correction on 2x2 tables");
    };

    auto* synth = app.add_subcommand("synth", "Write a synthetic recidivism-style dataset");
    synth->add_option("--out", o.out, "Output CSV")->required();
    synth->add_option("--rows", o.rows, "Number of rows");
    add_seed(synth);

    auto* split = app.add_subcommand("split", "Write the stratified split assignment of every row");
    add_config(split, true);
    split->add_option("--out", o.out, "Output CSV (row_id,split,label)")->required();
    add_seed(split);

    auto* train = app.add_subcommand("train", "Train the baseline model");
    add_config(train, true);
    train->add_option("--out", o.out, "Model checkpoint (JSON)")->required();
    add_seed(train);

    auto* compress = app.add_subcommand("compress", "Prune or quantize a trained baseline");
    add_config(compress, true);
    compress->add_option("--model", o.model, "Baseline checkpoint")->required()->check(CLI::ExistingFile);
    compress->add_option("--method", o.method, "prune or quantize")
        ->required()
        ->check(CLI::IsMember({"prune", "quantize"}));
    compress->add_option("--out", o.out, "Compressed checkpoint (JSON)")->required();
    add_seed(compress);

    auto* predict = app.add_subcommand("predict", "Write a prediction set for the validation and test splits");
    add_config(predict, true);
    predict->add_option("--model", o.model, "Baseline checkpoint")->required()->check(CLI::ExistingFile);
    predict->add_option("--variant", o.variants, "Compressed model as name=path (repeatable)");
    predict->add_option("--out", o.out, "Prediction set CSV")->required();
    add_seed(predict);

    auto* agree = app.add_subcommand("agree", "Agreement metrics and chi-squared tests per variant");
    agree->add_option("--preds", o.preds, "Prediction set CSV")->required()->check(CLI::ExistingFile);
    add_config(agree, false);
    add_stats(agree);

    auto* bias = app.add_subcommand("bias", "Equalized-odds bias per model and demographic");
    bias->add_option("--preds", o.preds, "Prediction set CSV")->required()->check(CLI::ExistingFile);
    add_config(bias, false);

    auto* chi2 = app.add_subcommand("chi2", "Chi-squared test of a contingency table");
    chi2->add_option("--table", o.table, "Row-major counts, comma separated")->required();
    chi2->add_option("--shape", o.shape, "RxC, e.g. 2x2")->required();
    add_stats(chi2);

    auto* audit = app.add_subcommand("audit", "Full metric battery over a prediction set");
    audit->add_option("--preds", o.preds, "Prediction set CSV")->required()->check(CLI::ExistingFile);
    audit->add_option("--out", o.out, "Also write report files to this directory");
    add_config(audit, false);
    add_stats(audit);

    auto* experiment = app.add_subcommand("experiment", "Run the multi-run protocol and write a report");
    add_config(experiment, true);
    experiment->add_option("--out", o.out, "Output directory")->required();
    experiment->add_option("--runs", o.runs, "Number of runs");
    add_seed(experiment);
    add_stats(experiment);

    std::vector<char*> argv;
    std::vector<std::string> storage = args.empty() ? std::vector<std::string>{"faithgate"} : args;
    for (auto& a : storage) {
        argv.push_back(a.data());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        const auto* sc = app.get_subcommands().front();
        const std::string name = sc->get_name();
        if (name == "synth") {
            return cmd_synth(o, out);
        }
        if (name == "split") {
            return cmd_split(o, out);
        }
        if (name == "train") {
            return cmd_train(o, out);
        }
        if (name == "compress") {
            return cmd_compress(o, out);
        }
        if (name == "predict") {
            return cmd_predict(o, out);
        }
        if (name == "agree") {
            return cmd_agree(o, out);
        }
        if (name == "bias") {
            return cmd_bias(o, out);
        }
        if (name == "chi2") {
            return cmd_chi2(o, out);
        }
        if (name == "audit") {
            return cmd_audit(o, out);
        }
        return cmd_experiment(o, out);
    } catch (const UsageError& e) {
        err << "faithgate: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "faithgate: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace faithgate
