// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "faithgate/checkpoint.hpp"
#include "faithgate/compress.hpp"
#include "faithgate/error.hpp"
#include "faithgate/random.hpp"
#include "support.hpp"

using namespace faithgate;
using nlohmann::json;

namespace {

struct Fixture {
    MlpModel model;
    Eigen::MatrixXd x;
    BinaryVector y;

    Fixture()
    {
        const std::vector<std::size_t> hidden{12, 6};
        model = make_mlp(5, hidden, std::vector<double>{0.1, 0.0}, 77);
        Rng rng(3);
        x.resize(120, 5);
        y.resize(120);
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            for (Eigen::Index c = 0; c < x.cols(); ++c) {
                x(r, c) = rng.normal();
            }
            y[static_cast<std::size_t>(r)] = x(r, 0) - x(r, 2) > 0 ? 1 : 0;
        }
        TrainConfig cfg;
        cfg.epochs = 3;
        model = train(model, x, y, cfg).model;
    }
};

bool same_parameters(const MlpModel& a, const MlpModel& b)
{
    if (a.layers.size() != b.layers.size()) {
        return false;
    }
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        if (a.layers[l].weights != b.layers[l].weights || a.layers[l].bias != b.layers[l].bias) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST_SUITE("checkpoint")
{
    TEST_CASE("mask bitmaps are row-major and most significant bit first")
    {
        Eigen::MatrixXd m(2, 3);
        m << 1, 0, 1, 1, 0, 0;
        // bits 101100 -> 1011 00(00)
        CHECK(mask_to_hex(m) == "b0");
        CHECK(mask_from_hex("b0", 2, 3) == m);
        CHECK_THROWS_AS(mask_from_hex("b", 2, 3), DataError);
        CHECK_THROWS_AS(mask_from_hex("B0", 2, 3), DataError);

        Rng rng(1);
        for (int t = 0; t < 50; ++t) {
            const auto rows = static_cast<Eigen::Index>(1 + rng.below(9));
            const auto cols = static_cast<Eigen::Index>(1 + rng.below(9));
            Eigen::MatrixXd mask(rows, cols);
            for (Eigen::Index i = 0; i < mask.size(); ++i) {
                mask.data()[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
            }
            CHECK(mask_from_hex(mask_to_hex(mask), rows, cols) == mask);
        }
    }

    TEST_CASE("plain model round trip is exact")
    {
        Fixture f;
        ModelCheckpoint ckpt;
        ckpt.model = f.model;
        ckpt.feature_names = {"a", "b", "c", "d", "e"};
        Standardizer st;
        st.mean = Eigen::VectorXd::LinSpaced(5, -1.0, 1.0);
        st.scale = Eigen::VectorXd::Constant(5, 2.5);
        ckpt.standardizer = st;

        testutil::TempDir dir("ckpt");
        save_checkpoint(dir / "m.json", ckpt);
        const auto back = load_checkpoint(dir / "m.json");
        CHECK(same_parameters(back.model, f.model));
        CHECK(back.model.dropout_rates == f.model.dropout_rates);
        CHECK(back.model.seed == 77);
        CHECK(back.feature_names == ckpt.feature_names);
        REQUIRE(back.standardizer.has_value());
        CHECK(back.standardizer->mean == st.mean);
        CHECK(back.standardizer->scale == st.scale);
        CHECK(back.compression.method == "none");
        CHECK(forward(back.model, f.x) == forward(f.model, f.x));

        const auto doc = checkpoint_to_json(ckpt);
        CHECK(doc["format"] == "faithgate.mlp");
        CHECK(doc["version"] == kCheckpointVersion);
        CHECK(doc["hidden_activation"] == "relu");
        CHECK(doc["output_activation"] == "sigmoid");
        CHECK(checkpoint_to_json(checkpoint_from_json(doc)).dump() == doc.dump());
    }

    TEST_CASE("pruned checkpoint keeps masks")
    {
        Fixture f;
        TrainConfig cfg;
        cfg.epochs = 2;
        const auto pruned = prune(f.model, PruneSchedule{0.5, 0.8, 0, 10, 3.0, 2}, cfg, f.x, f.y);
        ModelCheckpoint ckpt;
        ckpt.model = pruned.model;
        ckpt.compression.method = "prune";
        ckpt.compression.seed = 5;
        ckpt.compression.masks = pruned.masks;
        ckpt.compression.settings = {{"final_sparsity", 0.8}};
        const auto back = checkpoint_from_json(checkpoint_to_json(ckpt));
        CHECK(back.compression.method == "prune");
        CHECK(back.compression.settings["final_sparsity"] == 0.8);
        REQUIRE(back.compression.masks.size() == pruned.masks.size());
        for (std::size_t l = 0; l < pruned.masks.size(); ++l) {
            CHECK(back.compression.masks[l] == pruned.masks[l]);
        }
        CHECK(same_parameters(back.model, pruned.model));
    }

    TEST_CASE("quantized checkpoint rebuilds parameters from codes")
    {
        Fixture f;
        TrainConfig cfg;
        const auto q = quantize(f.model, QuantSpec{8, 1, true}, cfg, f.x, f.y);
        ModelCheckpoint ckpt;
        ckpt.model = q.model;
        ckpt.compression.method = "quantize";
        ckpt.compression.tensors = q.tensors;
        const auto back = checkpoint_from_json(checkpoint_to_json(ckpt));
        CHECK(same_parameters(back.model, q.model));
        REQUIRE(back.model.input_quantizers.size() == q.model.input_quantizers.size());
        CHECK(predict_labels(back.model, f.x) == predict_labels(q.model, f.x));
        CHECK(forward(back.model, f.x) == forward(q.model, f.x));
        for (std::size_t i = 0; i < q.tensors.size(); ++i) {
            CHECK(back.compression.tensors[i].codes == q.tensors[i].codes);
        }
    }

    TEST_CASE("malformed checkpoints are data errors")
    {
        Fixture f;
        ModelCheckpoint ckpt;
        ckpt.model = f.model;
        const auto good = checkpoint_to_json(ckpt);

        auto bad = good;
        bad["format"] = "other";
        CHECK_THROWS_AS(checkpoint_from_json(bad), DataError);
        bad = good;
        bad["version"] = 99;
        CHECK_THROWS_AS(checkpoint_from_json(bad), DataError);
        bad = good;
        bad["layers"][0]["weights"].erase(0);
        CHECK_THROWS_AS(checkpoint_from_json(bad), DataError);
        bad = good;
        bad.erase("seed");
        CHECK_THROWS_AS(checkpoint_from_json(bad), DataError);
        bad = good;
        bad["compression"]["masks"] = json::array({"ff"});
        CHECK_THROWS_AS(checkpoint_from_json(bad), DataError);

        testutil::TempDir dir("ckpt_bad");
        testutil::write_file(dir / "x.json", "{not json");
        CHECK_THROWS_AS(load_checkpoint(dir / "x.json"), DataError);
        CHECK_THROWS_AS(load_checkpoint(dir / "missing.json"), DataError);
    }
}
