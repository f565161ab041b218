// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#include "faithgate/compress.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "faithgate/error.hpp"

namespace faithgate {

void PruneSchedule::validate() const
{
    auto unit = [](double s) { return s >= 0.0 && s < 1.0; };
    if (!unit(initial_sparsity) || !unit(final_sparsity)) {
        throw UsageError(fmt::format("sparsities ({}, {}) must lie in [0, 1)", initial_sparsity,
                                     final_sparsity));
    }
    if (final_sparsity < initial_sparsity) {
        throw UsageError("final sparsity must not be below initial sparsity");
    }
    if (begin_step < 0 || end_step <= begin_step) {
        throw UsageError(fmt::format("pruning steps must satisfy 0 <= begin ({}) < end ({})",
                                     begin_step, end_step));
    }
    if (!(power > 0.0)) {
        throw UsageError("pruning schedule power must be positive");
    }
    if (frequency < 1) {
        throw UsageError("pruning frequency must be at least 1");
    }
}

double sparsity_at(const PruneSchedule& schedule, std::int64_t step)
{
    const double span = static_cast<double>(schedule.end_step - schedule.begin_step);
    const double progress =
        std::clamp(static_cast<double>(step - schedule.begin_step) / span, 0.0, 1.0);
    return schedule.final_sparsity + (schedule.initial_sparsity - schedule.final_sparsity) *
                                         std::pow(1.0 - progress, schedule.power);
}

std::size_t pruned_count(std::size_t size, double sparsity)
{
    return static_cast<std::size_t>(std::llround(sparsity * static_cast<double>(size)));
}

Eigen::MatrixXd magnitude_mask(const Eigen::MatrixXd& weights, double sparsity)
{
    const auto flat = flatten(weights);
    const std::size_t k = pruned_count(flat.size(), sparsity);
    std::vector<std::size_t> order(flat.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(flat[a]) < std::abs(flat[b]); });
    Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(weights.rows(), weights.cols());
    const auto cols = static_cast<std::size_t>(weights.cols());
    for (std::size_t i = 0; i < k; ++i) {
        const auto idx = order[i];
        mask(static_cast<Eigen::Index>(idx / cols), static_cast<Eigen::Index>(idx % cols)) = 0.0;
    }
    return mask;
}

namespace {

void apply_masks(MlpModel& model, const std::vector<Eigen::MatrixXd>& masks)
{
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        model.layers[l].weights = model.layers[l].weights.cwiseProduct(masks[l]);
    }
}

double mask_sparsity(const Eigen::MatrixXd& mask)
{
    return 1.0 - mask.sum() / static_cast<double>(mask.size());
}

}  // namespace

PruneResult prune(const MlpModel& model, const PruneSchedule& schedule, const TrainConfig& cfg,
                  const Eigen::MatrixXd& x, std::span<const std::uint8_t> y)
{
    schedule.validate();
    model.validate();
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto n = static_cast<std::size_t>(model.layers[l].weights.size());
        if (n - pruned_count(n, schedule.final_sparsity) < 1) {
            throw UsageError(fmt::format(
                "final sparsity {} would leave layer {} ({} weights) without a nonzero weight",
                schedule.final_sparsity, l, n));
        }
    }

    PruneResult result;
    result.masks.reserve(model.layers.size());
    for (const auto& layer : model.layers) {
        result.masks.push_back(Eigen::MatrixXd::Ones(layer.weights.rows(), layer.weights.cols()));
    }
    if (schedule.final_sparsity == 0.0) {
        result.model = model;
        result.layer_sparsity.assign(model.layers.size(), 0.0);
        return result;
    }

    auto& masks = result.masks;
    bool reached_final = false;
    TrainHooks hooks;
    hooks.before_step = [&](MlpModel& m, std::int64_t step) {
        if (step < schedule.begin_step || reached_final) {
            return;
        }
        if (step < schedule.end_step && (step - schedule.begin_step) % schedule.frequency != 0) {
            return;
        }
        const double target = sparsity_at(schedule, step);
        reached_final = step >= schedule.end_step;
        for (std::size_t l = 0; l < m.layers.size(); ++l) {
            masks[l] = magnitude_mask(m.layers[l].weights.cwiseProduct(masks[l]), target);
        }
        apply_masks(m, masks);
    };
    hooks.after_update = [&](MlpModel& m) { apply_masks(m, masks); };

    auto trained = train(model, x, y, cfg, hooks);
    MlpModel pruned = std::move(trained.model);

    // the schedule may not have reached its end within the fine-tuning budget
    for (std::size_t l = 0; l < pruned.layers.size(); ++l) {
        masks[l] = magnitude_mask(pruned.layers[l].weights.cwiseProduct(masks[l]), schedule.final_sparsity);
    }
    apply_masks(pruned, masks);

    result.model = std::move(pruned);
    result.loss_history = std::move(trained.loss_history);
    for (const auto& mask : masks) {
        result.layer_sparsity.push_back(mask_sparsity(mask));
    }
    return result;
}

void QuantSpec::validate() const
{
    if (bit_width != 4 && bit_width != 8 && bit_width != 16) {
        throw UsageError(fmt::format("bit width {} not in {{4, 8, 16}}", bit_width));
    }
    if (fine_tune_epochs < 0) {
        throw UsageError("fine-tune epochs must be non-negative");
    }
}

double QuantizedTensor::scale() const
{
    return range > 0.0 ? range / static_cast<double>(max_code()) : 1.0;
}

double QuantizedTensor::dequantize(std::int32_t code) const
{
    // (code / qmax) * range keeps 0 and +-range exact
    return range > 0.0 ? (static_cast<double>(code) / static_cast<double>(max_code())) * range : 0.0;
}

std::vector<double> QuantizedTensor::dequantize() const
{
    std::vector<double> out;
    out.reserve(codes.size());
    for (auto c : codes) {
        out.push_back(dequantize(c));
    }
    return out;
}

QuantizedTensor quantize_tensor(std::span<const double> values, int bits)
{
    if (bits < 2 || bits > 16) {
        throw UsageError(fmt::format("unsupported bit width {}", bits));
    }
    QuantizedTensor t;
    t.bits = bits;
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw StatError("cannot quantize a non-finite parameter");
        }
        t.range = std::max(t.range, std::abs(v));
    }
    t.codes.reserve(values.size());
    const auto qmax = t.max_code();
    if (t.range == 0.0) {
        t.codes.assign(values.size(), 0);
        return t;
    }
    const double s = t.scale();
    for (double v : values) {
        const auto code = static_cast<std::int32_t>(std::llround(v / s));
        t.codes.push_back(std::clamp(code, -qmax, qmax));
    }
    return t;
}

std::vector<double> flatten(const Eigen::MatrixXd& m)
{
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            out.push_back(m(r, c));
        }
    }
    return out;
}

namespace {

Eigen::MatrixXd unflatten(const std::vector<double>& values, Eigen::Index rows, Eigen::Index cols)
{
    Eigen::MatrixXd m(rows, cols);
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = values[i++];
        }
    }
    return m;
}

Eigen::VectorXd to_vector(const std::vector<double>& values)
{
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::vector<double> from_vector(const Eigen::VectorXd& v)
{
    return {v.data(), v.data() + v.size()};
}

}  // namespace

std::vector<std::optional<ActivationQuantizer>> calibrate_activations(const MlpModel& model,
                                                                      const Eigen::MatrixXd& x, int bits)
{
    model.validate();
    if (x.rows() == 0) {
        throw UsageError("activation calibration needs at least one row");
    }
    std::vector<std::optional<ActivationQuantizer>> out;
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        ActivationQuantizer q;
        q.bits = bits;
        q.lo = std::min(0.0, a.minCoeff());
        q.hi = std::max(0.0, a.maxCoeff());
        out.emplace_back(q);
        if (l + 1 == model.layers.size()) {
            break;
        }
        Eigen::MatrixXd in = a.unaryExpr([&q](double v) { return q.apply(v); });
        Eigen::MatrixXd z = in * model.layers[l].weights.transpose();
        z.rowwise() += model.layers[l].bias.transpose();
        a = z.cwiseMax(0.0);
    }
    return out;
}

MlpModel fake_quantize_parameters(const MlpModel& model, int bits)
{
    MlpModel view = model;
    for (auto& layer : view.layers) {
        const auto wq = quantize_tensor(flatten(layer.weights), bits);
        layer.weights = unflatten(wq.dequantize(), layer.weights.rows(), layer.weights.cols());
        const auto bq = quantize_tensor(from_vector(layer.bias), bits);
        layer.bias = to_vector(bq.dequantize());
    }
    return view;
}

QuantizeResult quantize(const MlpModel& model, const QuantSpec& spec, const TrainConfig& cfg,
                        const Eigen::MatrixXd& x, std::span<const std::uint8_t> y)
{
    spec.validate();
    model.validate();

    MlpModel latent = model;
    if (spec.quantize_activations) {
        latent.input_quantizers = calibrate_activations(model, x, spec.bit_width);
    }

    QuantizeResult result;
    if (spec.fine_tune_epochs > 0) {
        TrainConfig fine = cfg;
        fine.epochs = spec.fine_tune_epochs;
        TrainHooks hooks;
        hooks.forward_view = [bits = spec.bit_width](const MlpModel& m) {
            return fake_quantize_parameters(m, bits);
        };
        auto trained = train(latent, x, y, fine, hooks);
        latent = std::move(trained.model);
        result.loss_history = std::move(trained.loss_history);
    }
    snap_to_float32(latent);

    result.model = latent;
    for (auto& layer : result.model.layers) {
        auto wq = quantize_tensor(flatten(layer.weights), spec.bit_width);
        layer.weights = unflatten(wq.dequantize(), layer.weights.rows(), layer.weights.cols());
        auto bq = quantize_tensor(from_vector(layer.bias), spec.bit_width);
        layer.bias = to_vector(bq.dequantize());
        result.tensors.push_back(std::move(wq));
        result.tensors.push_back(std::move(bq));
    }
    return result;
}

SizeReport size_report(const MlpModel& model)
{
    SizeReport r;
    for (const auto& layer : model.layers) {
        r.total_parameters += layer.weights.size() + layer.bias.size();
        r.nonzero_parameters += (layer.weights.array() != 0.0).count() + (layer.bias.array() != 0.0).count();
    }
    r.parameter_bytes = r.total_parameters * 4;
    r.sparsity = r.total_parameters > 0
                     ? static_cast<double>(r.total_parameters - r.nonzero_parameters) /
                           static_cast<double>(r.total_parameters)
                     : 0.0;
    return r;
}

SizeReport size_report(std::span<const QuantizedTensor> tensors)
{
    SizeReport r;
    for (const auto& t : tensors) {
        const auto n = static_cast<std::int64_t>(t.codes.size());
        r.total_parameters += n;
        r.nonzero_parameters += std::count_if(t.codes.begin(), t.codes.end(), [](auto c) { return c != 0; });
        r.parameter_bytes += (n * t.bits + 7) / 8 + 4;
    }
    r.sparsity = r.total_parameters > 0
                     ? static_cast<double>(r.total_parameters - r.nonzero_parameters) /
                           static_cast<double>(r.total_parameters)
                     : 0.0;
    return r;
}

}  // namespace faithgate
