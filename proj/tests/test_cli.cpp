// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <sstream>

#include "faithgate/cli.hpp"
#include "faithgate/csv.hpp"
#include "support.hpp"

using namespace faithgate;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "faithgate");
    std::ostringstream out;
    std::ostringstream err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

double field(const std::string& text, const std::string& key)
{
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind(key + " ", 0) == 0) {
            return std::stod(line.substr(key.size() + 1));
        }
    }
    FAIL("missing " << key);
    return 0.0;
}

std::string small_config(const std::string& data)
{
    return "[data]\npath = \"" + data +
           "\"\nlabel = \"recid\"\nid = \"id\"\n"
           "numeric = [\"age\", \"priors_count\", \"juv_fel_count\", \"days_in_jail\"]\n"
           "categorical = [\"sex\", \"race\", \"charge_degree\"]\n\n"
           "[[subgroup]]\nname = \"Sex\"\ncolumn = \"sex\"\n\n"
           "[model]\nhidden = [16]\ndropout = [0.0]\n\n"
           "[train]\nepochs = 8\n\n[prune]\nepochs = 1\n\n[quantize]\nfine_tune_epochs = 1\n\n"
           "[experiment]\nruns = 1\nseed = 11\n";
}

}  // namespace

TEST_SUITE("cli")
{
    TEST_CASE("chi2 subcommand matches the oracle")
    {
        const auto r = cli({"chi2", "--table", "367,392,238,213", "--shape", "2x2"});
        REQUIRE(r.code == 0);
        const auto o = oracle::chi2({{367, 392}, {238, 213}}, true);
        CHECK(field(r.out, "statistic") == doctest::Approx(o.statistic).epsilon(1e-9));
        CHECK(field(r.out, "dof") == 1);
        CHECK(field(r.out, "p_value") == doctest::Approx(o.p).epsilon(1e-9));

        const auto plain = cli({"chi2", "--table", "367,392,238,213", "--shape", "2x2", "--no-yates"});
        const auto po = oracle::chi2({{367, 392}, {238, 213}}, false);
        CHECK(field(plain.out, "statistic") == doctest::Approx(po.statistic).epsilon(1e-9));

        const auto wide = cli({"chi2", "--table", "10,20,30,15,25,5", "--shape", "2x3"});
        CHECK(field(wide.out, "dof") == 2);
        CHECK(field(wide.out, "p_value") ==
              doctest::Approx(oracle::chi2({{10, 20, 30}, {15, 25, 5}}, true).p).epsilon(1e-9));
    }

    TEST_CASE("exit codes")
    {
        CHECK(cli({}).code == 1);
        CHECK(cli({"frobnicate"}).code == 1);
        CHECK(cli({"chi2", "--table", "1,2,3,4", "--shape", "2x2", "--bogus"}).code == 1);
        CHECK(cli({"chi2", "--table", "1,2,3", "--shape", "2x2"}).code == 1);
        CHECK(cli({"chi2", "--table", "1,2,3,4", "--shape", "2x2", "--threshold", "1.5"}).code == 1);
        CHECK(cli({"--help"}).code == 0);

        const auto degenerate = cli({"chi2", "--table", "0,0,3,4", "--shape", "2x2"});
        CHECK(degenerate.code == 2);
        CHECK(degenerate.err.find("degenerate table") != std::string::npos);

        testutil::TempDir dir("cli-codes");
        testutil::write_file(dir / "bad.csv", "row_id,split,y_true,pred_baseline\n0,test,1,7\n");
        const auto bad = cli({"audit", "--preds", (dir / "bad.csv").string()});
        CHECK(bad.code == 2);
        CHECK_FALSE(bad.err.empty());
        CHECK(cli({"audit", "--preds", (dir / "absent.csv").string()}).code == 1);
    }

    TEST_CASE("audit of identical predictions")
    {
        testutil::TempDir dir("cli-audit");
        std::string csv = "row_id,split,y_true,pred_baseline,pred_quantized,pred_pruned,sex\n";
        for (int i = 0; i < 200; ++i) {
            const int pred = (i * 7) % 11 < 4;
            csv += std::to_string(i) + "," + ((i / 2) % 2 ? "val" : "test") + "," + std::to_string(i % 3 == 0) + "," +
                   std::to_string(pred) + "," + std::to_string(pred) + "," + std::to_string(pred) + "," +
                   (i % 5 ? "Male" : "Female") + "\n";
        }
        testutil::write_file(dir / "p.csv", csv);
        const auto r = cli({"audit", "--preds", (dir / "p.csv").string(), "--out", (dir / "out").string()});
        REQUIRE_MESSAGE(r.code == 0, r.err);
        CHECK(r.out.find("Summary: Faithful (0 of") != std::string::npos);
        CHECK(std::filesystem::exists(dir / "out" / "report.md"));
        CHECK(testutil::read_file(dir / "p.csv") == csv);
    }

    TEST_CASE("pipeline from synthetic data to audit")
    {
        testutil::TempDir dir("cli-pipeline");
        const auto data = (dir / "data.csv").string();
        const auto config = (dir / "c.toml").string();
        REQUIRE(cli({"synth", "--out", data, "--rows", "2000", "--seed", "3"}).code == 0);
        testutil::write_file(config, small_config("data.csv"));
        const auto data_before = testutil::read_file(data);
        const auto config_before = testutil::read_file(config);

        REQUIRE(cli({"split", "--config", config, "--out", (dir / "split.csv").string()}).code == 0);
        const auto split = read_csv(dir / "split.csv");
        CHECK(split.rows.size() == 2000);

        const auto base = (dir / "base.json").string();
        REQUIRE(cli({"train", "--config", config, "--out", base}).code == 0);
        const auto base_before = testutil::read_file(base);
        REQUIRE(cli({"compress", "--config", config, "--model", base, "--method", "prune", "--out",
                     (dir / "pruned.json").string()})
                    .code == 0);
        REQUIRE(cli({"compress", "--config", config, "--model", base, "--method", "quantize", "--out",
                     (dir / "quant.json").string()})
                    .code == 0);
        CHECK(cli({"compress", "--config", config, "--model", base, "--method", "distill", "--out",
                   (dir / "x.json").string()})
                  .code == 1);

        const auto preds = (dir / "preds.csv").string();
        REQUIRE(cli({"predict", "--config", config, "--model", base, "--variant",
                     "pruned=" + (dir / "pruned.json").string(), "--variant",
                     "quantized=" + (dir / "quant.json").string(), "--out", preds})
                    .code == 0);
        const auto pset = read_csv(preds);
        CHECK(pset.header[0] == "row_id");
        CHECK(std::find(pset.header.begin(), pset.header.end(), "pred_pruned") != pset.header.end());
        CHECK(std::find(pset.header.begin(), pset.header.end(), "sex") != pset.header.end());
        CHECK(pset.rows.size() == 600);
        const auto preds_before = testutil::read_file(preds);

        const auto agree = cli({"agree", "--preds", preds});
        CHECK(agree.code == 0);
        CHECK(agree.out.find("pruned") != std::string::npos);
        CHECK(cli({"bias", "--preds", preds}).code == 0);
        const auto audit = cli({"audit", "--preds", preds, "--config", config});
        CHECK(audit.code == 0);
        CHECK(audit.out.find("Summary: ") != std::string::npos);

        // Training twice with the same seed gives the same checkpoint.
        REQUIRE(cli({"train", "--config", config, "--out", (dir / "again.json").string()}).code == 0);
        CHECK(testutil::read_file(dir / "again.json") == base_before);

        CHECK(testutil::read_file(data) == data_before);
        CHECK(testutil::read_file(config) == config_before);
        CHECK(testutil::read_file(base) == base_before);
        CHECK(testutil::read_file(preds) == preds_before);

        const auto exp = cli({"experiment", "--config", config, "--out", (dir / "exp").string(), "--runs", "2"});
        CHECK(exp.code == 0);
        CHECK(std::filesystem::exists(dir / "exp" / "report.json"));
        CHECK(testutil::read_file(data) == data_before);
    }
}
