// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "faithgate/nnet.hpp"

namespace faithgate {

// Polynomial sparsity ramp from initial to final sparsity between begin_step
// and end_step. The mask is refreshed every `frequency` steps.
struct PruneSchedule {
    double initial_sparsity = 0.5;
    double final_sparsity = 0.8;
    std::int64_t begin_step = 0;
    std::int64_t end_step = 1000;
    double power = 3.0;
    std::int64_t frequency = 100;

    void validate() const;
};

// s(t) = s_f + (s_i - s_f) * (1 - clamp((t - begin) / (end - begin), 0, 1))^power
double sparsity_at(const PruneSchedule& schedule, std::int64_t step);

// Number of weights zeroed in a tensor of `size` elements at `sparsity`.
std::size_t pruned_count(std::size_t size, double sparsity);

// 0/1 mask zeroing the pruned_count(...) smallest-magnitude entries. Ties are
// broken by row-major index.
Eigen::MatrixXd magnitude_mask(const Eigen::MatrixXd& weights, double sparsity);

struct PruneResult {
    MlpModel model;
    std::vector<Eigen::MatrixXd> masks;  // one per layer (weights only; biases are never pruned)
    std::vector<double> layer_sparsity;
    std::vector<double> loss_history;
};

// Magnitude pruning of every layer's weights while fine-tuning for cfg.epochs.
// Masked weights stay exactly zero; the final mask is at final_sparsity.
PruneResult prune(const MlpModel& model, const PruneSchedule& schedule, const TrainConfig& cfg,
                  const Eigen::MatrixXd& x, std::span<const std::uint8_t> y);

struct QuantSpec {
    int bit_width = 8;
    int fine_tune_epochs = 2;
    bool quantize_activations = true;

    void validate() const;
};

// Symmetric per-tensor quantization: code = round(w / scale) with
// scale = max|w| / (2^(bits-1) - 1).
struct QuantizedTensor {
    std::vector<std::int32_t> codes;
    double range = 0.0;  // max |w|
    int bits = 8;

    double scale() const;
    std::int32_t max_code() const { return (1 << (bits - 1)) - 1; }
    double dequantize(std::int32_t code) const;
    std::vector<double> dequantize() const;
};

QuantizedTensor quantize_tensor(std::span<const double> values, int bits);

// Row-major flattening used for weight tensors.
std::vector<double> flatten(const Eigen::MatrixXd& m);

// Input ranges of every layer from one inference pass over `x`; ranges always include 0.
std::vector<std::optional<ActivationQuantizer>> calibrate_activations(const MlpModel& model,
                                                                      const Eigen::MatrixXd& x, int bits);

// Parameters replaced by their fake-quantized values (one tensor per weight
// matrix and per bias vector).
MlpModel fake_quantize_parameters(const MlpModel& model, int bits);

struct QuantizeResult {
    MlpModel model;                        // dequantized parameters + activation quantizers
    std::vector<QuantizedTensor> tensors;  // layer0 weights, layer0 bias, layer1 weights, ...
    std::vector<double> loss_history;
};

// Calibrates activation ranges, fine-tunes with straight-through fake
// quantization for spec.fine_tune_epochs, then stores integer codes.
QuantizeResult quantize(const MlpModel& model, const QuantSpec& spec, const TrainConfig& cfg,
                        const Eigen::MatrixXd& x, std::span<const std::uint8_t> y);

struct SizeReport {
    std::int64_t parameter_bytes = 0;
    std::int64_t total_parameters = 0;
    std::int64_t nonzero_parameters = 0;
    double sparsity = 0.0;  // zeros / total
};

// 32-bit floats for every parameter.
SizeReport size_report(const MlpModel& model);

// Codes at their bit width plus one 32-bit scale per tensor.
SizeReport size_report(std::span<const QuantizedTensor> tensors);

}  // namespace faithgate
