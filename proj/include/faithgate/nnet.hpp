// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "faithgate/metrics.hpp"
#include "faithgate/random.hpp"

namespace faithgate {

// Fully connected layer computing W x + b; W is (outputs x inputs).
struct DenseLayer {
    Eigen::MatrixXd weights;
    Eigen::VectorXd bias;
};

// Affine fake quantizer over a calibrated range [lo, hi] that always contains 0.
struct ActivationQuantizer {
    double lo = 0.0;
    double hi = 0.0;
    int bits = 8;

    double scale() const;
    double zero_point() const;
    double apply(double value) const;
    bool passes_gradient(double value) const { return value >= lo && value <= hi; }
};

// Rectifier hidden layers and a single logistic output unit.
struct MlpModel {
    std::vector<DenseLayer> layers;
    std::vector<double> dropout_rates;  // one per hidden layer, in [0, 1)
    // Empty, or one optional quantizer per layer applied to that layer's input.
    std::vector<std::optional<ActivationQuantizer>> input_quantizers;
    std::uint64_t seed = 0;

    std::size_t input_width() const;
    std::size_t hidden_layer_count() const { return layers.empty() ? 0 : layers.size() - 1; }
    std::size_t parameter_count() const;
    void validate() const;
};

MlpModel make_mlp(std::size_t inputs, std::span<const std::size_t> hidden,
                  std::span<const double> dropout_rates, std::uint64_t seed);

// Rounds every parameter to the nearest 32-bit float.
void snap_to_float32(MlpModel& model);

struct TrainConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int epochs = 20;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;

    void validate() const;
};

// Output-unit logits. Dropout masks are drawn from `rng` when `training`.
Eigen::VectorXd forward_logits(const MlpModel& model, const Eigen::MatrixXd& x, bool training = false,
                               Rng* rng = nullptr);

// Probabilities, strictly inside (0, 1).
Eigen::VectorXd forward(const MlpModel& model, const Eigen::MatrixXd& x, bool training = false,
                        Rng* rng = nullptr);

// label = 1 iff probability >= threshold
BinaryVector threshold_labels(const Eigen::VectorXd& probabilities, double threshold = 0.5);
BinaryVector predict_labels(const MlpModel& model, const Eigen::MatrixXd& x, double threshold = 0.5);

struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> bias;
};

struct LossAndGradients {
    double loss = 0.0;
    Gradients gradients;
};

// Mean binary cross-entropy (computed from logits) in inference mode.
double bce_loss(const MlpModel& model, const Eigen::MatrixXd& x, std::span<const std::uint8_t> y);

// Loss and its gradient with respect to every parameter. With `training`,
// dropout masks come from `rng`. Input quantizers use a straight-through
// estimator that blocks gradients outside the calibrated range.
LossAndGradients loss_and_gradients(const MlpModel& model, const Eigen::MatrixXd& x,
                                    std::span<const std::uint8_t> y, bool training = false,
                                    Rng* rng = nullptr);

// Extension points used by the compression procedures.
struct TrainHooks {
    // Before every optimizer step; receives the 0-based global step.
    std::function<void(MlpModel&, std::int64_t)> before_step;
    // After every parameter update.
    std::function<void(MlpModel&)> after_update;
    // Parameters used in the forward pass; gradients are applied to the
    // stored parameters unchanged (straight-through).
    std::function<MlpModel(const MlpModel&)> forward_view;
};

struct TrainResult {
    MlpModel model;
    std::vector<double> loss_history;  // mean training loss per epoch
    std::int64_t steps = 0;
};

std::int64_t steps_per_epoch(std::size_t rows, std::size_t batch_size);

// Mini-batch Adam on binary cross-entropy. Parameters end rounded to 32-bit
// floats. Throws StatError if the loss becomes non-finite.
TrainResult train(MlpModel model, const Eigen::MatrixXd& x, std::span<const std::uint8_t> y,
                  const TrainConfig& cfg, const TrainHooks& hooks = {});

}  // namespace faithgate
