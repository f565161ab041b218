// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "faithgate/compress.hpp"
#include "faithgate/error.hpp"
#include "faithgate/nnet.hpp"
#include "faithgate/random.hpp"

using namespace faithgate;

namespace {

struct Problem {
    Eigen::MatrixXd x;
    BinaryVector y;
};

Problem noisy_problem(std::size_t n, std::size_t features, std::uint64_t seed)
{
    Rng rng(seed);
    Problem p;
    p.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(features));
    p.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t f = 0; f < features; ++f) {
            const double v = rng.normal();
            p.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = v;
            s += (f % 2 == 0 ? 1.0 : -0.5) * v;
        }
        p.y[i] = s + 0.5 * rng.normal() > 0.0 ? 1 : 0;
    }
    return p;
}

MlpModel default_shape(std::size_t inputs, std::uint64_t seed)
{
    const std::vector<std::size_t> hidden{64, 32, 16};
    return make_mlp(inputs, hidden, std::vector<double>{0.1, 0.1, 0.0}, seed);
}

std::int64_t zeros(const Eigen::MatrixXd& m)
{
    return (m.array() == 0.0).count();
}

}  // namespace

TEST_SUITE("compress")
{
    TEST_CASE("sparsity schedule endpoints and midpoint")
    {
        PruneSchedule s;
        s.initial_sparsity = 0.5;
        s.final_sparsity = 0.8;
        s.begin_step = 100;
        s.end_step = 300;
        CHECK(sparsity_at(s, 100) == 0.5);
        CHECK(sparsity_at(s, 0) == 0.5);
        CHECK(sparsity_at(s, 300) == 0.8);
        CHECK(sparsity_at(s, 5000) == 0.8);
        CHECK(sparsity_at(s, 200) == doctest::Approx(0.7625).epsilon(1e-12));

        PruneSchedule high{0.85, 0.95, 0, 10, 3.0, 1};
        CHECK(sparsity_at(high, 0) == 0.85);
        CHECK(sparsity_at(high, 10) == 0.95);
    }

    TEST_CASE("sparsity schedule is monotone and continuous")
    {
        Rng rng(19);
        for (int t = 0; t < 100; ++t) {
            PruneSchedule s;
            s.initial_sparsity = rng.uniform(0.0, 0.5);
            s.final_sparsity = rng.uniform(s.initial_sparsity, 0.99);
            s.begin_step = static_cast<std::int64_t>(rng.below(50));
            s.end_step = s.begin_step + 1 + static_cast<std::int64_t>(rng.below(500));
            s.power = rng.uniform(1.0, 5.0);
            double prev = sparsity_at(s, 0);
            const double max_jump = (s.final_sparsity - s.initial_sparsity) * s.power /
                                        static_cast<double>(s.end_step - s.begin_step) +
                                    1e-12;
            for (std::int64_t step = 1; step <= s.end_step + 5; ++step) {
                const double now = sparsity_at(s, step);
                CHECK(now >= prev);
                CHECK(now - prev <= max_jump);
                prev = now;
            }
        }
    }

    TEST_CASE("schedule validation")
    {
        CHECK_THROWS_AS((PruneSchedule{0.8, 0.5, 0, 10, 3.0, 1}.validate()), UsageError);
        CHECK_THROWS_AS((PruneSchedule{0.5, 1.0, 0, 10, 3.0, 1}.validate()), UsageError);
        CHECK_THROWS_AS((PruneSchedule{0.5, 0.8, 10, 10, 3.0, 1}.validate()), UsageError);
        CHECK_THROWS_AS((PruneSchedule{0.5, 0.8, 0, 10, 3.0, 0}.validate()), UsageError);
    }

    TEST_CASE("magnitude mask zeros the smallest weights")
    {
        Eigen::MatrixXd w(1, 4);
        w << 0.1, -0.5, 0.2, -0.05;
        const auto mask = magnitude_mask(w, 0.5);
        CHECK(mask(0, 0) == 0.0);
        CHECK(mask(0, 1) == 1.0);
        CHECK(mask(0, 2) == 1.0);
        CHECK(mask(0, 3) == 0.0);

        // ties broken by index
        Eigen::MatrixXd tied = Eigen::MatrixXd::Constant(2, 2, 0.3);
        const auto tm = magnitude_mask(tied, 0.5);
        CHECK(tm(0, 0) == 0.0);
        CHECK(tm(0, 1) == 0.0);
        CHECK(tm(1, 0) == 1.0);
        CHECK(magnitude_mask(w, 0.0).isOnes());
    }

    TEST_CASE("zero final sparsity leaves the model unchanged")
    {
        const auto p = noisy_problem(200, 5, 1);
        const auto m = default_shape(5, 2);
        PruneSchedule s{0.0, 0.0, 0, 10, 3.0, 1};
        TrainConfig cfg;
        cfg.epochs = 2;
        const auto res = prune(m, s, cfg, p.x, p.y);
        for (std::size_t l = 0; l < m.layers.size(); ++l) {
            CHECK(res.masks[l].isOnes());
            CHECK(res.model.layers[l].weights == m.layers[l].weights);
            CHECK(res.model.layers[l].bias == m.layers[l].bias);
        }
    }

    TEST_CASE("pruning hits the final sparsity in every layer")
    {
        const auto p = noisy_problem(600, 8, 3);
        const auto m = default_shape(8, 4);
        for (const auto& [si, sf] : {std::pair{0.5, 0.8}, std::pair{0.85, 0.95}}) {
            PruneSchedule s{si, sf, 0, 40, 3.0, 5};
            TrainConfig cfg;
            cfg.epochs = 4;
            cfg.seed = 6;
            const auto res = prune(m, s, cfg, p.x, p.y);
            for (std::size_t l = 0; l < m.layers.size(); ++l) {
                const auto& w = res.model.layers[l].weights;
                const double n = static_cast<double>(w.size());
                INFO("layer " << l << " target " << sf);
                CHECK(std::fabs(static_cast<double>(zeros(w)) - sf * n) <= 1.0);
                CHECK(std::fabs(res.layer_sparsity[l] - sf) <= 1.0 / n);
                // masked entries are exactly zero
                CHECK(w.cwiseProduct((1.0 - res.masks[l].array()).matrix()).isZero(0.0));
            }
            // pruning changes neither the parameter count nor the byte size
            CHECK(size_report(res.model).parameter_bytes == size_report(m).parameter_bytes);
            CHECK(size_report(res.model).nonzero_parameters < size_report(m).nonzero_parameters);
        }
    }

    TEST_CASE("masked weights stay zero throughout fine-tuning")
    {
        const auto p = noisy_problem(300, 6, 5);
        const auto m = default_shape(6, 7);
        PruneSchedule s{0.5, 0.8, 0, 20, 3.0, 4};
        TrainConfig cfg;
        cfg.epochs = 3;
        const auto res = prune(m, s, cfg, p.x, p.y);
        // once a weight is pruned at the final mask it is zero in the model
        for (std::size_t l = 0; l < m.layers.size(); ++l) {
            for (Eigen::Index i = 0; i < res.masks[l].size(); ++i) {
                if (res.masks[l].data()[i] == 0.0) {
                    CHECK(res.model.layers[l].weights.data()[i] == 0.0);
                }
            }
        }
        // a fine-tune of the pruned model with its masks re-applied keeps them
        const auto again = prune(res.model, PruneSchedule{0.8, 0.8, 0, 1, 3.0, 1}, cfg, p.x, p.y);
        for (std::size_t l = 0; l < m.layers.size(); ++l) {
            CHECK(again.masks[l] == res.masks[l]);
        }
    }

    TEST_CASE("pruning an already sparse model changes no mask bit")
    {
        const auto p = noisy_problem(300, 6, 8);
        const auto m = default_shape(6, 9);
        PruneSchedule s{0.5, 0.8, 0, 20, 3.0, 4};
        TrainConfig cfg;
        cfg.epochs = 2;
        const auto first = prune(m, s, cfg, p.x, p.y);
        const auto second = prune(first.model, s, cfg, p.x, p.y);
        for (std::size_t l = 0; l < m.layers.size(); ++l) {
            CHECK(magnitude_mask(first.model.layers[l].weights, 0.8) == first.masks[l]);
            CHECK(second.masks[l] == first.masks[l]);
        }
    }

    TEST_CASE("pruning cannot empty a layer")
    {
        const auto p = noisy_problem(20, 1, 1);
        const std::vector<std::size_t> hidden{1};
        const auto tiny = make_mlp(1, hidden, {}, 1);
        CHECK_THROWS_AS(prune(tiny, PruneSchedule{0.5, 0.8, 0, 10, 3.0, 1}, TrainConfig{}, p.x, p.y),
                        UsageError);
    }

    TEST_CASE("quantizing endpoints is exact")
    {
        const std::vector<double> v{-1.0, 0.0, 1.0};
        const auto q = quantize_tensor(v, 8);
        CHECK(q.codes == std::vector<std::int32_t>{-127, 0, 127});
        CHECK(q.scale() == doctest::Approx(1.0 / 127.0).epsilon(1e-15));
        CHECK(q.dequantize() == v);

        const auto z = quantize_tensor(std::vector<double>(5, 0.0), 8);
        CHECK(z.scale() == 1.0);
        CHECK(z.codes == std::vector<std::int32_t>(5, 0));
        CHECK_THROWS_AS(quantize_tensor(std::vector<double>{NAN}, 8), StatError);
    }

    TEST_CASE("quantization round trip stays within half a step")
    {
        Rng rng(2718);
        for (int t = 0; t < 200; ++t) {
            const std::size_t n = 1 + rng.below(3000);
            const double spread = std::pow(10.0, rng.uniform(-4.0, 2.0));
            std::vector<double> v(n);
            for (auto& x : v) {
                x = rng.normal() * spread;
            }
            for (int bits : {4, 8, 16}) {
                const auto q = quantize_tensor(v, bits);
                const auto back = q.dequantize();
                const double half = q.scale() / 2.0;
                double max_abs = 0.0;
                std::size_t at_max = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    CHECK(std::fabs(back[i] - v[i]) <= half);
                    if (std::fabs(v[i]) > max_abs) {
                        max_abs = std::fabs(v[i]);
                        at_max = i;
                    }
                }
                CHECK(back[at_max] == v[at_max]);
                std::set<std::int32_t> distinct(q.codes.begin(), q.codes.end());
                CHECK(distinct.size() <= (std::size_t{1} << bits));
                for (auto c : q.codes) {
                    CHECK(std::abs(c) <= q.max_code());
                }
                CHECK(quantize_tensor(v, bits).codes == q.codes);
            }
        }
    }

    TEST_CASE("parameter byte accounting")
    {
        // 35 inputs, 27 hidden units, one output: 1000 parameters in four tensors
        const std::vector<std::size_t> hidden{27};
        const auto m = make_mlp(35, hidden, {}, 3);
        REQUIRE(m.parameter_count() == 1000);
        const auto base = size_report(m);
        CHECK(base.parameter_bytes == 4000);
        CHECK(base.total_parameters == 1000);

        const auto q = quantize(m, QuantSpec{8, 0, false}, TrainConfig{}, noisy_problem(10, 35, 1).x,
                                noisy_problem(10, 35, 1).y);
        REQUIRE(q.tensors.size() == 4);
        const auto qs = size_report(q.tensors);
        CHECK(qs.parameter_bytes == 1016);
        CHECK(qs.total_parameters == 1000);
    }

    TEST_CASE("quantized model contract")
    {
        const auto p = noisy_problem(400, 8, 12);
        const auto m = default_shape(8, 13);
        TrainConfig cfg;
        cfg.seed = 14;
        const auto res = quantize(m, QuantSpec{8, 2, true}, cfg, p.x, p.y);
        REQUIRE(res.tensors.size() == 2 * m.layers.size());
        CHECK(res.loss_history.size() == 2);
        for (std::size_t l = 0; l < m.layers.size(); ++l) {
            const auto& wq = res.tensors[2 * l];
            const auto back = wq.dequantize();
            CHECK(flatten(res.model.layers[l].weights) == back);
            std::set<double> values(back.begin(), back.end());
            CHECK(values.size() <= 256);
        }
        REQUIRE(res.model.input_quantizers.size() == m.layers.size());
        for (const auto& q : res.model.input_quantizers) {
            REQUIRE(q.has_value());
            CHECK(q->lo <= 0.0);
            CHECK(q->hi >= 0.0);
        }
        const auto qs = size_report(res.tensors);
        const auto bs = size_report(m);
        CHECK(qs.parameter_bytes <= 0.30 * static_cast<double>(bs.parameter_bytes));
        // deterministic
        const auto again = quantize(m, QuantSpec{8, 2, true}, cfg, p.x, p.y);
        for (std::size_t i = 0; i < res.tensors.size(); ++i) {
            CHECK(again.tensors[i].codes == res.tensors[i].codes);
            CHECK(again.tensors[i].range == res.tensors[i].range);
        }
        CHECK_THROWS_AS(quantize(m, QuantSpec{6, 2, true}, cfg, p.x, p.y), UsageError);
    }

    TEST_CASE("activation quantizer keeps zero exact")
    {
        ActivationQuantizer q{-0.7, 3.1, 8};
        CHECK(q.apply(0.0) == 0.0);
        CHECK(std::fabs(q.apply(1.234) - 1.234) <= q.scale() / 2.0 + 1e-15);
        CHECK(q.apply(10.0) <= 3.1 + q.scale());
        CHECK(q.passes_gradient(1.0));
        CHECK_FALSE(q.passes_gradient(3.2));
    }
}
