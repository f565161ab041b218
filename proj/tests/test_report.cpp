// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "faithgate/audit.hpp"
#include "faithgate/config.hpp"
#include "faithgate/csv.hpp"
#include "faithgate/report.hpp"
#include "support.hpp"

using namespace faithgate;
using nlohmann::json;

namespace {

std::string fixed(double v, int decimals)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

// "mean (std)" computed directly from per-run values.
std::string cell_from_runs(const std::vector<double>& values)
{
    const auto [m, s] = oracle::welford(values);
    return fixed(m, 3) + " (" + fixed(s, 4) + ")";
}

// Rows of the Markdown table that follows `heading`, as trimmed cells.
std::vector<std::vector<std::string>> table_after(const std::string& md, const std::string& heading)
{
    std::vector<std::vector<std::string>> rows;
    const auto at = md.find(heading + "\n");
    REQUIRE(at != std::string::npos);
    std::istringstream in(md.substr(at + heading.size() + 1));
    std::string line;
    bool started = false;
    int seen = 0;
    while (std::getline(in, line)) {
        if (line.empty()) {
            if (started) {
                break;
            }
            continue;
        }
        if (line[0] != '|') {
            break;
        }
        started = true;
        if (++seen <= 2) {
            continue;  // header and alignment rows
        }
        std::vector<std::string> cells;
        std::size_t pos = 1;
        while (pos < line.size()) {
            const auto next = line.find('|', pos);
            cells.push_back(trim(line.substr(pos, next - pos)));
            pos = next + 1;
        }
        rows.push_back(cells);
    }
    return rows;
}

std::string title(std::string s)
{
    s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

const json& experiment_doc()
{
    static const json doc = [] {
        auto c = load_config(FAITHGATE_SOURCE_DIR "/configs/experiment.toml");
        c.model.hidden = {8, 4};
        c.model.dropout = {0.1, 0.0};
        c.train.epochs = 3;
        c.prune.epochs = 1;
        c.quantize.spec.fine_tune_epochs = 1;
        c.experiment.runs = 4;
        return report_to_json(run_experiment(c));
    }();
    return doc;
}

}  // namespace

TEST_SUITE("report")
{
    TEST_CASE("aggregate cells")
    {
        CHECK(format_aggregate(json{{"mean", 0.896}, {"sample_std", 0.0103}, {"n_runs", 10}}) == "0.896 (0.0103)");
        CHECK(format_aggregate(json{{"mean", 0.896}, {"sample_std", nullptr}, {"n_runs", 1}}) == "0.896 (n/a)");
        CHECK(format_aggregate(json{{"mean", nullptr}, {"sample_std", nullptr}, {"n_runs", 0}}) == "n/a");
        CHECK(format_fixed(0.0088, 4) == "0.0088");
        CHECK(format_percent(json(0.0091)) == "0.9%");
        CHECK(format_percent(json(nullptr)) == "n/a");
    }

    TEST_CASE("rendered tables match values recomputed from the runs")
    {
        const auto& doc = experiment_doc();
        const auto md = render_markdown(doc);
        CHECK(md == render_markdown(doc));

        for (const std::string split : {"val", "test"}) {
            const std::string name = split == "val" ? "validation" : "test";
            const auto cls = table_after(md, "## Classification metrics (" + name + " split)");
            REQUIRE(cls.size() == doc["models"].size());
            for (const auto& row : cls) {
                for (std::size_t k = 0; k < 4; ++k) {
                    const char* metric[] = {"accuracy", "precision", "recall", "f1"};
                    std::vector<double> values;
                    for (const auto& run : doc["runs"]) {
                        for (const auto& e : run["evaluations"]) {
                            if (e["split"] == split && title(e["model"]) == row[0]) {
                                values.push_back(e["metrics"][metric[k]]);
                            }
                        }
                    }
                    REQUIRE(values.size() == 4);
                    CHECK(row[1 + k] == cell_from_runs(values));
                }
            }

            const auto agr = table_after(md, "## Agreement with baseline (" + name + " split)");
            REQUIRE(agr.size() == doc["variants"].size());
            for (const auto& row : agr) {
                std::vector<double> acc;
                int below = 0;
                for (const auto& run : doc["runs"]) {
                    for (const auto& a : run["agreements"]) {
                        if (a["split"] == split && title(a["variant"]) == row[0]) {
                            acc.push_back(a["metrics"]["accuracy"]);
                            below += a["chi_square"]["p_value"].get<double>() <= 0.05;
                        }
                    }
                }
                CHECK(row[1] == cell_from_runs(acc));
                CHECK(row[5] == std::to_string(below) + " of 4 runs below threshold");
            }

            const auto bias = table_after(md, "## Bias by equalized odds (" + name + " split)");
            REQUIRE(bias.size() == doc["demographics"].size());
            for (const auto& row : bias) {
                for (std::size_t m = 0; m < doc["models"].size(); ++m) {
                    std::vector<double> values;
                    for (const auto& run : doc["runs"]) {
                        for (const auto& e : run["evaluations"]) {
                            if (e["split"] != split || e["model"] != doc["models"][m]) {
                                continue;
                            }
                            for (const auto& b : e["bias"]) {
                                if (b["demographic"] == row[0] && !b["bias"].is_null()) {
                                    values.push_back(b["bias"]);
                                }
                            }
                        }
                    }
                    CHECK(row[1 + m] == cell_from_runs(values));
                }
            }
        }

        const auto pred = table_after(md, "### Accuracy");
        REQUIRE(pred.size() == doc["models"].size());
        for (const auto& row : pred) {
            double sq = 0.0;
            double pct = 0.0;
            for (const auto& run : doc["runs"]) {
                double val = 0.0;
                double test = 0.0;
                for (const auto& e : run["evaluations"]) {
                    if (title(e["model"]) == row[0]) {
                        (e["split"] == "val" ? val : test) = e["metrics"]["accuracy"];
                    }
                }
                sq += (val - test) * (val - test);
                pct += std::fabs(val - test) / std::fabs(test);
            }
            CHECK(row[1] == fixed(std::sqrt(sq / 4.0), 4));
            CHECK(row[2] == fixed(100.0 * pct / 4.0, 1) + "%");
        }

        const auto size = table_after(md, "## Model size (run 0)");
        REQUIRE(size.size() == 3);
        const auto& sizes = doc["runs"][0]["sizes"];
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(size[i][0] == title(sizes[i]["model"]));
            CHECK(size[i][1] == std::to_string(sizes[i]["parameter_bytes"].get<long long>()));
        }
    }

    TEST_CASE("report without demographics omits the bias section")
    {
        PredictionSet ps;
        ps.variant_names = {"q"};
        ps.variants.resize(1);
        for (int i = 0; i < 40; ++i) {
            ps.row_ids.push_back(std::to_string(i));
            ps.split.push_back("test");
            ps.y_true.push_back(i % 2);
            ps.baseline.push_back(i % 3 == 0);
            ps.variants[0].push_back(i % 3 == 0);
        }
        const auto md = render_markdown(report_to_json(audit_predictions(ps, {})));
        CHECK(md.find("No demographic subgroups were configured") != std::string::npos);
        CHECK(md.find("Bias by equalized odds") == std::string::npos);
    }

    TEST_CASE("written report files")
    {
        auto c = load_config(FAITHGATE_SOURCE_DIR "/configs/experiment.toml");
        c.model.hidden = {4};
        c.model.dropout = {0.0};
        c.train.epochs = 1;
        c.prune.epochs = 1;
        c.quantize.spec.fine_tune_epochs = 0;
        c.experiment.runs = 2;
        const auto report = run_experiment(c);
        testutil::TempDir dir("report");
        write_report(report, dir.path());
        for (const char* name : {"report.json", "report.md", "accuracy_by_run.csv", "agreement_by_run.csv",
                                 "bias_by_run.csv", "subgroup_pvalues_by_run.csv", "pvalue_counts.csv",
                                 "predictability.csv", "verdict_predictability.csv", "size.csv"}) {
            CHECK(std::filesystem::exists(dir / name));
        }
        const auto parsed = json::parse(testutil::read_file(dir / "report.json"));
        CHECK(parsed == report_to_json(report));
        CHECK(testutil::read_file(dir / "report.md") == render_markdown(parsed));

        const auto acc = read_csv(dir / "accuracy_by_run.csv");
        CHECK(acc.header == std::vector<std::string>{"run", "seed", "split", "model", "accuracy", "precision",
                                                     "recall", "f1"});
        CHECK(acc.rows.size() == 2 * 2 * 3);
        const auto agr = read_csv(dir / "agreement_by_run.csv");
        CHECK(agr.rows.size() == 2 * 2 * 2);
        const auto sizes = read_csv(dir / "size.csv");
        CHECK(sizes.rows.size() == 2 * 3);
    }
}
