// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#include "faithgate/report.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "faithgate/audit.hpp"
#include "faithgate/csv.hpp"
#include "faithgate/error.hpp"

namespace faithgate {

using nlohmann::json;

namespace {

json counts_json(const ConfusionCounts& c)
{
    return {{"tp", c.tp}, {"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn}};
}

json metrics_json(const ClassificationMetrics& m)
{
    json j = {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
    if (m.degenerate()) {
        json undefined = json::array();
        if (!m.precision_defined) {
            undefined.push_back("precision");
        }
        if (!m.recall_defined) {
            undefined.push_back("recall");
        }
        if (!m.f1_defined) {
            undefined.push_back("f1");
        }
        j["undefined"] = std::move(undefined);
    }
    return j;
}

json table_json(const ContingencyTable& t)
{
    json observed = json::array();
    for (std::size_t r = 0; r < t.rows(); ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < t.cols(); ++c) {
            row.push_back(t.at(r, c));
        }
        observed.push_back(std::move(row));
    }
    return {{"row_labels", t.row_labels()}, {"col_labels", t.col_labels()}, {"observed", std::move(observed)}};
}

json chi_json(const ContingencyTable& table, const ChiSquareResult& r, const FaithfulnessVerdict& v)
{
    json expected = json::array();
    for (std::size_t i = 0; i < r.rows; ++i) {
        json row = json::array();
        for (std::size_t c = 0; c < r.cols; ++c) {
            row.push_back(r.expected_at(i, c));
        }
        expected.push_back(std::move(row));
    }
    return {{"table", table_json(table)},
            {"expected", std::move(expected)},
            {"statistic", r.statistic},
            {"dof", r.dof},
            {"p_value", r.p_value},
            {"yates", r.correction_applied},
            {"verdict", verdict_name(v.verdict)}};
}

json optional_json(const std::optional<double>& v)
{
    return v ? json(*v) : json(nullptr);
}

json bias_json(const BiasReport& b)
{
    json groups = json::array();
    for (const auto& g : b.group_rates) {
        groups.push_back({{"group", g.group_label},
                          {"sensitivity", optional_json(g.sensitivity)},
                          {"specificity", optional_json(g.specificity)},
                          {"support", g.support}});
    }
    return {{"demographic", b.demographic}, {"bias", optional_json(b.bias)}, {"groups", std::move(groups)}};
}

json size_json(const SizeReport& s)
{
    return {{"parameter_bytes", s.parameter_bytes},
            {"total_parameters", s.total_parameters},
            {"nonzero_parameters", s.nonzero_parameters},
            {"sparsity", s.sparsity}};
}

json run_json(const RunRecord& run)
{
    json j;
    j["run"] = run.run;
    j["seed"] = run.seed;
    j["rows"] = {{"train", run.train_rows}, {"val", run.validation_rows}, {"test", run.test_rows}};
    json evals = json::array();
    for (const auto& e : run.evaluations) {
        json bias = json::array();
        for (const auto& b : e.bias) {
            bias.push_back(bias_json(b));
        }
        evals.push_back({{"model", e.model},
                         {"split", e.split},
                         {"counts", counts_json(e.counts)},
                         {"metrics", metrics_json(e.metrics)},
                         {"bias", std::move(bias)}});
    }
    j["evaluations"] = std::move(evals);
    json agreements = json::array();
    for (const auto& a : run.agreements) {
        json subgroups = json::array();
        for (const auto& s : a.subgroups) {
            json groups = json::array();
            for (std::size_t g = 0; g < s.per_group.size(); ++g) {
                const auto& pg = s.result.per_group[g];
                json gj = chi_json(pg.table, pg.result, s.per_group[g]);
                gj["group"] = pg.group_label;
                groups.push_back(std::move(gj));
            }
            subgroups.push_back({{"demographic", s.result.demographic},
                                 {"groups", std::move(groups)},
                                 {"combined", chi_json(s.result.combined_table, s.result.combined, s.combined)},
                                 {"masked", s.masked()}});
        }
        agreements.push_back({{"variant", a.variant},
                              {"split", a.split},
                              {"counts", counts_json(a.counts)},
                              {"metrics", metrics_json(a.metrics)},
                              {"chi_square", chi_json(a.table, a.chi, a.verdict)},
                              {"subgroups", std::move(subgroups)}});
    }
    j["agreements"] = std::move(agreements);
    json sizes = json::array();
    for (const auto& s : run.sizes) {
        json sj = size_json(s.size);
        sj["model"] = s.model;
        sizes.push_back(std::move(sj));
    }
    j["sizes"] = std::move(sizes);
    if (!run.layer_sparsity.empty()) {
        j["pruned_layer_sparsity"] = run.layer_sparsity;
    }
    return j;
}

json aggregate_json(const std::vector<double>& values)
{
    json j;
    j["n_runs"] = values.size();
    if (values.empty()) {
        j["mean"] = nullptr;
        j["sample_std"] = nullptr;
        j["note"] = "no defined values";
    } else if (values.size() == 1) {
        j["mean"] = values.front();
        j["sample_std"] = nullptr;
        j["note"] = "insufficient for std";
    } else {
        const auto a = aggregate(values);
        j["mean"] = a.mean;
        j["sample_std"] = a.sample_std;
    }
    return j;
}

json error_json(const std::vector<double>& forecast, const std::vector<double>& actual)
{
    json j;
    j["n_runs"] = actual.size();
    if (actual.empty()) {
        j["rmse"] = nullptr;
        j["mape"] = nullptr;
        j["note"] = "no defined values";
        return j;
    }
    j["rmse"] = rmse(forecast, actual);
    try {
        j["mape"] = mape(forecast, actual);
    } catch (const StatError&) {
        j["mape"] = nullptr;
        j["note"] = "MAPE undefined: a test-set value is zero";
    }
    return j;
}

const json* find_bias(const json& evaluation, const std::string& demographic)
{
    for (const auto& b : evaluation["bias"]) {
        if (b["demographic"] == demographic) {
            return &b;
        }
    }
    return nullptr;
}

const json* find_entry(const json& list, const char* key, const std::string& name, const std::string& split)
{
    for (const auto& e : list) {
        if (e[key] == name && e["split"] == split) {
            return &e;
        }
    }
    return nullptr;
}

// Summary section computed only from the serialized per-run records.
json summarize(const json& doc)
{
    const auto& runs = doc["runs"];
    const double threshold = doc["threshold"];
    const double val_threshold = doc["validation_threshold"];
    json summary;
    static const char* kMetrics[] = {"accuracy", "precision", "recall", "f1"};

    json classification = json::array();
    json agreement = json::array();
    json bias = json::array();
    json counts = json::array();
    for (const auto& split_j : doc["splits"]) {
        const std::string split = split_j;
        const double thr = split == kValidationTag ? val_threshold : threshold;
        for (const auto& model_j : doc["models"]) {
            const std::string model = model_j;
            json row = {{"model", model}, {"split", split}};
            for (const char* m : kMetrics) {
                std::vector<double> v;
                for (const auto& run : runs) {
                    v.push_back(find_entry(run["evaluations"], "model", model, split)->at("metrics")[m]);
                }
                row[m] = aggregate_json(v);
            }
            classification.push_back(std::move(row));
        }
        for (const auto& demo_j : doc["demographics"]) {
            const std::string demo = demo_j["name"];
            for (const auto& model_j : doc["models"]) {
                const std::string model = model_j;
                std::vector<double> v;
                for (const auto& run : runs) {
                    const auto& b = find_bias(*find_entry(run["evaluations"], "model", model, split), demo)->at("bias");
                    if (!b.is_null()) {
                        v.push_back(b);
                    }
                }
                json row = {{"demographic", demo}, {"model", model}, {"split", split}, {"bias", aggregate_json(v)}};
                row["excluded_runs"] = runs.size() - v.size();
                bias.push_back(std::move(row));
            }
        }
        for (const auto& variant_j : doc["variants"]) {
            const std::string variant = variant_j;
            json row = {{"variant", variant}, {"split", split}};
            for (const char* m : kMetrics) {
                std::vector<double> v;
                for (const auto& run : runs) {
                    v.push_back(find_entry(run["agreements"], "variant", variant, split)->at("metrics")[m]);
                }
                row[m] = aggregate_json(v);
            }
            agreement.push_back(std::move(row));

            auto tally = [&](const json& scope, const json& demographic, const json& group, auto&& pick) {
                std::size_t below = 0;
                for (const auto& run : runs) {
                    const double p = pick(*find_entry(run["agreements"], "variant", variant, split));
                    below += p <= thr ? 1 : 0;
                }
                counts.push_back({{"variant", variant},
                                  {"split", split},
                                  {"scope", scope},
                                  {"demographic", demographic},
                                  {"group", group},
                                  {"threshold", thr},
                                  {"below", below},
                                  {"above", runs.size() - below},
                                  {"runs", runs.size()}});
            };
            tally("overall", nullptr, nullptr, [](const json& a) -> double { return a["chi_square"]["p_value"]; });
            for (std::size_t d = 0; d < doc["demographics"].size(); ++d) {
                const auto& demo = doc["demographics"][d];
                tally("combined", demo["name"], nullptr,
                      [d](const json& a) -> double { return a["subgroups"][d]["combined"]["p_value"]; });
                for (std::size_t g = 0; g < demo["groups"].size(); ++g) {
                    tally("group", demo["name"], demo["groups"][g], [d, g](const json& a) -> double {
                        return a["subgroups"][d]["groups"][g]["p_value"];
                    });
                }
            }
        }
    }
    summary["classification"] = std::move(classification);
    summary["agreement"] = std::move(agreement);
    summary["bias"] = std::move(bias);
    summary["pvalue_counts"] = std::move(counts);

    const bool has_val = std::find(doc["splits"].begin(), doc["splits"].end(), kValidationTag) != doc["splits"].end();
    if (has_val) {
        json pred;
        json acc = json::array();
        for (const auto& model_j : doc["models"]) {
            std::vector<double> f, a;
            for (const auto& run : runs) {
                f.push_back(find_entry(run["evaluations"], "model", model_j, kValidationTag)->at("metrics")["accuracy"]);
                a.push_back(find_entry(run["evaluations"], "model", model_j, kTestTag)->at("metrics")["accuracy"]);
            }
            json row = error_json(f, a);
            row["model"] = model_j;
            acc.push_back(std::move(row));
        }
        pred["accuracy"] = std::move(acc);
        json agr = json::array();
        json verdicts = json::array();
        for (const auto& variant_j : doc["variants"]) {
            std::vector<double> f, a;
            for (const auto& run : runs) {
                f.push_back(
                    find_entry(run["agreements"], "variant", variant_j, kValidationTag)->at("metrics")["accuracy"]);
                a.push_back(find_entry(run["agreements"], "variant", variant_j, kTestTag)->at("metrics")["accuracy"]);
            }
            json row = error_json(f, a);
            row["variant"] = variant_j;
            agr.push_back(std::move(row));

            auto score = [&](const json& scope, const json& demographic, const json& group, auto&& pick) {
                std::vector<PredictabilityOutcome> outcomes;
                for (const auto& run : runs) {
                    const auto& v = *find_entry(run["agreements"], "variant", variant_j, kValidationTag);
                    const auto& t = *find_entry(run["agreements"], "variant", variant_j, kTestTag);
                    outcomes.push_back({judge(pick(v), val_threshold), judge(pick(t), threshold)});
                }
                const auto s = predictability_score(outcomes);
                verdicts.push_back({{"variant", variant_j},
                                    {"scope", scope},
                                    {"demographic", demographic},
                                    {"group", group},
                                    {"correct", s.correct},
                                    {"total", s.total}});
            };
            score("overall", nullptr, nullptr, [](const json& a) -> double { return a["chi_square"]["p_value"]; });
            for (std::size_t d = 0; d < doc["demographics"].size(); ++d) {
                const auto& demo = doc["demographics"][d];
                score("combined", demo["name"], nullptr,
                      [d](const json& a) -> double { return a["subgroups"][d]["combined"]["p_value"]; });
                for (std::size_t g = 0; g < demo["groups"].size(); ++g) {
                    score("group", demo["name"], demo["groups"][g], [d, g](const json& a) -> double {
                        return a["subgroups"][d]["groups"][g]["p_value"];
                    });
                }
            }
        }
        pred["agreement_accuracy"] = std::move(agr);
        json bias_err = json::array();
        for (const auto& demo_j : doc["demographics"]) {
            for (const auto& model_j : doc["models"]) {
                std::vector<double> f, a;
                for (const auto& run : runs) {
                    const auto& bv =
                        find_bias(*find_entry(run["evaluations"], "model", model_j, kValidationTag), demo_j["name"])
                            ->at("bias");
                    const auto& bt =
                        find_bias(*find_entry(run["evaluations"], "model", model_j, kTestTag), demo_j["name"])
                            ->at("bias");
                    if (!bv.is_null() && !bt.is_null()) {
                        f.push_back(bv);
                        a.push_back(bt);
                    }
                }
                json row = error_json(f, a);
                row["demographic"] = demo_j["name"];
                row["model"] = model_j;
                bias_err.push_back(std::move(row));
            }
        }
        pred["bias"] = std::move(bias_err);
        pred["verdicts"] = std::move(verdicts);
        summary["predictability"] = std::move(pred);
    }

    json masking = json::array();
    for (const auto& run : runs) {
        for (const auto& a : run["agreements"]) {
            for (const auto& s : a["subgroups"]) {
                if (!s["masked"].get<bool>()) {
                    continue;
                }
                json groups = json::array();
                for (const auto& g : s["groups"]) {
                    if (g["verdict"] == "NotFaithful") {
                        groups.push_back(g["group"]);
                    }
                }
                masking.push_back({{"run", run["run"]},
                                   {"variant", a["variant"]},
                                   {"split", a["split"]},
                                   {"demographic", s["demographic"]},
                                   {"combined_p_value", s["combined"]["p_value"]},
                                   {"significant_groups", std::move(groups)}});
            }
        }
    }
    summary["masking"] = std::move(masking);

    if (!runs.empty() && !runs[0]["sizes"].empty()) {
        json sizes = json::array();
        const double base_bytes = runs[0]["sizes"][0]["parameter_bytes"];
        for (const auto& s : runs[0]["sizes"]) {
            json row = s;
            row["reduction"] = 1.0 - s["parameter_bytes"].get<double>() / base_bytes;
            sizes.push_back(std::move(row));
        }
        summary["size"] = std::move(sizes);
    }
    return summary;
}

std::string num(const json& v)
{
    if (v.is_null()) {
        return "";
    }
    if (v.is_number_float()) {
        return fmt::format("{}", v.get<double>());
    }
    return v.dump();
}

std::string str(const json& v)
{
    return v.is_null() ? "" : v.get<std::string>();
}

std::string csv_text(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows)
{
    std::ostringstream out;
    write_csv_row(out, header);
    for (const auto& r : rows) {
        write_csv_row(out, r);
    }
    return out.str();
}

}  // namespace

json report_to_json(const AuditReport& report)
{
    json doc;
    doc["schema"] = "faithgate.report";
    doc["schema_version"] = kReportSchemaVersion;
    doc["source"] = report.source;
    doc["threshold"] = report.threshold;
    doc["validation_threshold"] = report.validation_threshold;
    doc["yates"] = report.yates;
    doc["models"] = report.models;
    doc["variants"] = report.variants;
    doc["splits"] = report.splits;
    json demos = json::array();
    for (std::size_t d = 0; d < report.demographics.size(); ++d) {
        demos.push_back({{"name", report.demographics[d]}, {"groups", report.demographic_groups[d]}});
    }
    doc["demographics"] = std::move(demos);
    doc["settings"] = report.settings;
    doc["notes"] = report.notes;
    json runs = json::array();
    for (const auto& r : report.runs) {
        runs.push_back(run_json(r));
    }
    doc["runs"] = std::move(runs);
    doc["summary"] = summarize(doc);
    return doc;
}

std::vector<std::pair<std::string, std::string>> report_csv_files(const AuditReport& report)
{
    const json doc = report_to_json(report);
    std::vector<std::pair<std::string, std::string>> files;
    static const char* kMetrics[] = {"accuracy", "precision", "recall", "f1"};

    std::vector<std::vector<std::string>> acc, agr, bias, sub, sizes;
    for (const auto& run : doc["runs"]) {
        for (const auto& e : run["evaluations"]) {
            std::vector<std::string> row{num(run["run"]), num(run["seed"]), str(e["split"]), str(e["model"])};
            for (const char* m : kMetrics) {
                row.push_back(num(e["metrics"][m]));
            }
            acc.push_back(std::move(row));
            for (const auto& b : e["bias"]) {
                bias.push_back({num(run["run"]), str(e["split"]), str(e["model"]), str(b["demographic"]),
                                num(b["bias"])});
            }
        }
        for (const auto& a : run["agreements"]) {
            const auto& c = a["counts"];
            const auto& chi = a["chi_square"];
            std::vector<std::string> row{num(run["run"]), str(a["split"]), str(a["variant"]),
                                         num(c["tp"]),    num(c["tn"]),    num(c["fp"]),
                                         num(c["fn"])};
            for (const char* m : kMetrics) {
                row.push_back(num(a["metrics"][m]));
            }
            row.insert(row.end(), {num(chi["statistic"]), num(chi["dof"]), num(chi["p_value"]), str(chi["verdict"])});
            agr.push_back(std::move(row));
            for (const auto& s : a["subgroups"]) {
                for (const auto& g : s["groups"]) {
                    sub.push_back({num(run["run"]), str(a["split"]), str(a["variant"]), str(s["demographic"]),
                                   str(g["group"]), num(g["statistic"]), num(g["dof"]), num(g["p_value"]),
                                   str(g["verdict"])});
                }
                const auto& cmb = s["combined"];
                sub.push_back({num(run["run"]), str(a["split"]), str(a["variant"]), str(s["demographic"]),
                               "combined", num(cmb["statistic"]), num(cmb["dof"]), num(cmb["p_value"]),
                               str(cmb["verdict"])});
            }
        }
        for (const auto& s : run["sizes"]) {
            sizes.push_back({num(run["run"]), str(s["model"]), num(s["parameter_bytes"]), num(s["total_parameters"]),
                             num(s["nonzero_parameters"]), num(s["sparsity"])});
        }
    }
    files.emplace_back("accuracy_by_run.csv",
                       csv_text({"run", "seed", "split", "model", "accuracy", "precision", "recall", "f1"}, acc));
    files.emplace_back("agreement_by_run.csv",
                       csv_text({"run", "split", "variant", "tp", "tn", "fp", "fn", "accuracy", "precision", "recall",
                                 "f1", "statistic", "dof", "p_value", "verdict"},
                                agr));
    files.emplace_back("bias_by_run.csv", csv_text({"run", "split", "model", "demographic", "bias"}, bias));
    files.emplace_back("subgroup_pvalues_by_run.csv",
                       csv_text({"run", "split", "variant", "demographic", "group", "statistic", "dof", "p_value",
                                 "verdict"},
                                sub));

    const auto& summary = doc["summary"];
    std::vector<std::vector<std::string>> counts;
    for (const auto& c : summary["pvalue_counts"]) {
        counts.push_back({str(c["variant"]), str(c["split"]), str(c["scope"]), str(c["demographic"]),
                          str(c["group"]), num(c["threshold"]), num(c["below"]), num(c["above"]), num(c["runs"])});
    }
    files.emplace_back("pvalue_counts.csv", csv_text({"variant", "split", "scope", "demographic", "group", "threshold",
                                                      "below", "above", "runs"},
                                                     counts));

    std::vector<std::vector<std::string>> pred, verdicts;
    if (summary.contains("predictability")) {
        const auto& p = summary["predictability"];
        for (const auto& r : p["accuracy"]) {
            pred.push_back({"accuracy", str(r["model"]), "", num(r["rmse"]), num(r["mape"]), num(r["n_runs"])});
        }
        for (const auto& r : p["agreement_accuracy"]) {
            pred.push_back(
                {"agreement_accuracy", str(r["variant"]), "", num(r["rmse"]), num(r["mape"]), num(r["n_runs"])});
        }
        for (const auto& r : p["bias"]) {
            pred.push_back({"bias", str(r["model"]), str(r["demographic"]), num(r["rmse"]), num(r["mape"]),
                            num(r["n_runs"])});
        }
        for (const auto& v : p["verdicts"]) {
            verdicts.push_back({str(v["variant"]), str(v["scope"]), str(v["demographic"]), str(v["group"]),
                                num(v["correct"]), num(v["total"])});
        }
    }
    files.emplace_back("predictability.csv",
                       csv_text({"quantity", "model", "demographic", "rmse", "mape", "n_runs"}, pred));
    files.emplace_back("verdict_predictability.csv",
                       csv_text({"variant", "scope", "demographic", "group", "correct", "total"}, verdicts));
    files.emplace_back("size.csv", csv_text({"run", "model", "parameter_bytes", "total_parameters",
                                             "nonzero_parameters", "sparsity"},
                                            sizes));
    return files;
}

void write_report(const AuditReport& report, const std::filesystem::path& out_dir)
{
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw UsageError(fmt::format("cannot create output directory '{}': {}", out_dir.string(), ec.message()));
    }
    auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream out(out_dir / name, std::ios::binary);
        if (!out) {
            throw UsageError(fmt::format("cannot write '{}'", (out_dir / name).string()));
        }
        out << text;
    };
    const json doc = report_to_json(report);
    write("report.json", doc.dump(2) + "\n");
    write("report.md", render_markdown(doc));
    for (const auto& [name, text] : report_csv_files(report)) {
        write(name, text);
    }
}

// ---------------------------------------------------------------------------
// Markdown

std::string format_fixed(double value, int decimals)
{
    return fmt::format("{:.{}f}", value, decimals);
}

std::string format_aggregate(const json& agg, int decimals)
{
    if (agg["mean"].is_null()) {
        return "n/a";
    }
    const std::string mean = format_fixed(agg["mean"].get<double>(), decimals);
    if (agg["sample_std"].is_null()) {
        return mean + " (n/a)";
    }
    return fmt::format("{} ({})", mean, format_fixed(agg["sample_std"].get<double>(), decimals + 1));
}

std::string format_percent(const json& fraction)
{
    if (fraction.is_null()) {
        return "n/a";
    }
    return format_fixed(100.0 * fraction.get<double>(), 1) + "%";
}

namespace {

std::string title_case(const std::string& s)
{
    std::string out = s;
    if (!out.empty() && out[0] >= 'a' && out[0] <= 'z') {
        out[0] = static_cast<char>(out[0] - 'a' + 'A');
    }
    return out;
}

std::string split_name(const std::string& tag)
{
    return tag == kValidationTag ? "validation" : tag;
}

// The first `text_columns` columns are left-aligned, the rest right-aligned.
void table_header(std::string& out, const std::vector<std::string>& cols, std::size_t text_columns = 1)
{
    out += "|";
    for (const auto& c : cols) {
        out += " " + c + " |";
    }
    out += "\n|";
    for (std::size_t i = 0; i < cols.size(); ++i) {
        out += i < text_columns ? "---|" : "---:|";
    }
    out += "\n";
}

void table_row(std::string& out, const std::vector<std::string>& cells)
{
    out += "|";
    for (const auto& c : cells) {
        out += " " + c + " |";
    }
    out += "\n";
}

std::string tally_cell(const json& c)
{
    return fmt::format("{} of {} runs below threshold", c["below"].get<std::size_t>(), c["runs"].get<std::size_t>());
}

}  // namespace

std::string render_markdown(const json& doc)
{
    const auto& summary = doc.at("summary");
    std::string out = "# Faithfulness audit\n\n";
    out += fmt::format("Runs: {}. Verdict: NotFaithful when p <= {}", doc["runs"].size(),
                       num(doc["threshold"]));
    if (doc["validation_threshold"] != doc["threshold"]) {
        out += fmt::format(" (validation split: p <= {})", num(doc["validation_threshold"]));
    }
    out += fmt::format(". Yates correction on 2x2 tables: {}.\n", doc["yates"].get<bool>() ? "on" : "off");
    out += "Cells show the mean with the sample standard deviation in parentheses.\n";

    for (const auto& split_j : doc["splits"]) {
        const std::string split = split_j;
        out += fmt::format("\n## Classification metrics ({} split)\n\n", split_name(split));
        table_header(out, {"Model", "Accuracy", "Precision", "Recall", "F1"});
        for (const auto& row : summary["classification"]) {
            if (row["split"] == split) {
                table_row(out, {title_case(row["model"]), format_aggregate(row["accuracy"]),
                                format_aggregate(row["precision"]), format_aggregate(row["recall"]),
                                format_aggregate(row["f1"])});
            }
        }
    }

    for (const auto& split_j : doc["splits"]) {
        const std::string split = split_j;
        out += fmt::format("\n## Agreement with baseline ({} split)\n\n", split_name(split));
        table_header(out, {"Variant", "Accuracy", "Precision", "Recall", "F1", "Chi-squared"});
        for (const auto& row : summary["agreement"]) {
            if (row["split"] != split) {
                continue;
            }
            std::string tally;
            for (const auto& c : summary["pvalue_counts"]) {
                if (c["split"] == split && c["variant"] == row["variant"] && c["scope"] == "overall") {
                    tally = tally_cell(c);
                }
            }
            table_row(out, {title_case(row["variant"]), format_aggregate(row["accuracy"]),
                            format_aggregate(row["precision"]), format_aggregate(row["recall"]),
                            format_aggregate(row["f1"]), tally});
        }
    }

    if (doc["demographics"].empty()) {
        out += "\n## Bias\n\nNo demographic subgroups were configured, so the bias and subgroup sections are "
               "omitted.\n";
    } else {
        for (const auto& split_j : doc["splits"]) {
            const std::string split = split_j;
            out += fmt::format("\n## Bias by equalized odds ({} split)\n\n", split_name(split));
            std::vector<std::string> cols{"Demographic"};
            for (const auto& m : doc["models"]) {
                cols.push_back(title_case(m));
            }
            table_header(out, cols);
            for (const auto& demo : doc["demographics"]) {
                std::vector<std::string> cells{demo["name"]};
                for (const auto& m : doc["models"]) {
                    for (const auto& row : summary["bias"]) {
                        if (row["split"] == split && row["model"] == m && row["demographic"] == demo["name"]) {
                            cells.push_back(format_aggregate(row["bias"]));
                        }
                    }
                }
                table_row(out, cells);
            }
        }
        for (const auto& split_j : doc["splits"]) {
            const std::string split = split_j;
            out += fmt::format("\n## Subgroup agreement tests ({} split)\n\n", split_name(split));
            table_header(out, {"Variant", "Demographic", "Group", "Chi-squared"}, 4);
            for (const auto& c : summary["pvalue_counts"]) {
                if (c["split"] != split || c["scope"] == "overall") {
                    continue;
                }
                table_row(out, {title_case(c["variant"]), c["demographic"],
                                c["scope"] == "combined" ? std::string("combined") : str(c["group"]), tally_cell(c)});
            }
        }
        out += "\n## Masked subgroup effects\n\n";
        if (summary["masking"].empty()) {
            out += "None detected: no combined test was Faithful while one of its groups was NotFaithful.\n";
        } else {
            for (const auto& m : summary["masking"]) {
                std::string groups;
                for (const auto& g : m["significant_groups"]) {
                    groups += (groups.empty() ? "" : ", ") + g.get<std::string>();
                }
                out += fmt::format("- run {}, {}, {} split, {}: combined p = {} but NotFaithful in {}\n",
                                   num(m["run"]), str(m["variant"]), split_name(m["split"]), str(m["demographic"]),
                                   format_fixed(m["combined_p_value"].get<double>(), 4), groups);
            }
        }
    }

    if (summary.contains("predictability")) {
        const auto& p = summary["predictability"];
        out += "\n## Predictability from the validation split\n\n";
        out += "Validation values are the forecast and test values the actual.\n\n";
        out += "### Accuracy\n\n";
        table_header(out, {"Model", "RMSE", "MAPE"});
        for (const auto& r : p["accuracy"]) {
            table_row(out, {title_case(r["model"]), r["rmse"].is_null() ? "n/a" : format_fixed(r["rmse"], 4),
                            format_percent(r["mape"])});
        }
        out += "\n### Agreement accuracy\n\n";
        table_header(out, {"Variant", "RMSE", "MAPE"});
        for (const auto& r : p["agreement_accuracy"]) {
            table_row(out, {title_case(r["variant"]), r["rmse"].is_null() ? "n/a" : format_fixed(r["rmse"], 4),
                            format_percent(r["mape"])});
        }
        if (!p["bias"].empty()) {
            out += "\n### Bias\n\n";
            table_header(out, {"Demographic", "Model", "RMSE", "MAPE"}, 2);
            for (const auto& r : p["bias"]) {
                table_row(out, {r["demographic"], title_case(r["model"]),
                                r["rmse"].is_null() ? "n/a" : format_fixed(r["rmse"], 4), format_percent(r["mape"])});
            }
        }
        out += "\n### Verdicts identified correctly by the validation split\n\n";
        table_header(out, {"Variant", "Test", "Correct"}, 2);
        for (const auto& v : p["verdicts"]) {
            std::string scope = "overall";
            if (v["scope"] == "combined") {
                scope = str(v["demographic"]) + " (combined)";
            } else if (v["scope"] == "group") {
                scope = str(v["demographic"]) + ": " + str(v["group"]);
            }
            table_row(out, {title_case(v["variant"]), scope,
                            fmt::format("{}/{}", num(v["correct"]), num(v["total"]))});
        }
    }

    if (summary.contains("size")) {
        out += "\n## Model size (run 0)\n\n";
        table_header(out, {"Model", "Parameter bytes", "Nonzero parameters", "Sparsity", "Reduction"});
        for (const auto& s : summary["size"]) {
            table_row(out, {title_case(s["model"]), num(s["parameter_bytes"]),
                            fmt::format("{} of {}", num(s["nonzero_parameters"]), num(s["total_parameters"])),
                            format_percent(s["sparsity"]), format_percent(s["reduction"])});
        }
    }

    bool any_mape_note = false;
    if (summary.contains("predictability")) {
        for (const auto& key : {"accuracy", "agreement_accuracy", "bias"}) {
            for (const auto& r : summary["predictability"][key]) {
                any_mape_note = any_mape_note || r.contains("note");
            }
        }
    }
    if (!doc["notes"].empty() || any_mape_note) {
        out += "\n## Notes\n\n";
        for (const auto& n : doc["notes"]) {
            out += "- " + n.get<std::string>() + "\n";
        }
        if (any_mape_note) {
            out += "- MAPE is shown as n/a where a test-set value is zero or no run had defined values.\n";
        }
    }
    return out;
}

}  // namespace faithgate
