// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#include "faithgate/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "faithgate/error.hpp"

namespace faithgate {

double ActivationQuantizer::scale() const
{
    const double levels = std::ldexp(1.0, bits) - 1.0;
    return (hi - lo) / levels;
}

double ActivationQuantizer::zero_point() const
{
    const double s = scale();
    return s > 0.0 ? std::round(-lo / s) : 0.0;
}

double ActivationQuantizer::apply(double value) const
{
    const double s = scale();
    if (!(s > 0.0)) {
        return std::clamp(value, lo, hi);
    }
    const double qmax = std::ldexp(1.0, bits) - 1.0;
    const double zp = zero_point();
    const double q = std::clamp(std::round(value / s) + zp, 0.0, qmax);
    return (q - zp) * s;
}

std::size_t MlpModel::input_width() const
{
    return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weights.cols());
}

std::size_t MlpModel::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& layer : layers) {
        n += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
    }
    return n;
}

void MlpModel::validate() const
{
    if (layers.empty()) {
        throw UsageError("model has no layers");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        if (layer.bias.size() != layer.weights.rows()) {
            throw UsageError(fmt::format("layer {}: bias width {} does not match {} outputs", l,
                                         layer.bias.size(), layer.weights.rows()));
        }
        if (l > 0 && layer.weights.cols() != layers[l - 1].weights.rows()) {
            throw UsageError(fmt::format("layer {}: expects {} inputs but previous layer has {} outputs",
                                         l, layer.weights.cols(), layers[l - 1].weights.rows()));
        }
    }
    if (layers.back().weights.rows() != 1) {
        throw UsageError("output layer must have width 1");
    }
    if (dropout_rates.size() != hidden_layer_count()) {
        throw UsageError(fmt::format("{} dropout rates given for {} hidden layers", dropout_rates.size(),
                                     hidden_layer_count()));
    }
    for (double rate : dropout_rates) {
        if (!(rate >= 0.0 && rate < 1.0)) {
            throw UsageError(fmt::format("dropout rate {} outside [0, 1)", rate));
        }
    }
    if (!input_quantizers.empty() && input_quantizers.size() != layers.size()) {
        throw UsageError("one input quantizer slot per layer is required");
    }
}

MlpModel make_mlp(std::size_t inputs, std::span<const std::size_t> hidden,
                  std::span<const double> dropout_rates, std::uint64_t seed)
{
    if (inputs == 0) {
        throw UsageError("model needs at least one input feature");
    }
    MlpModel model;
    model.seed = seed;
    model.dropout_rates.assign(dropout_rates.begin(), dropout_rates.end());
    if (model.dropout_rates.empty()) {
        model.dropout_rates.assign(hidden.size(), 0.0);
    }

    Rng rng(derive_seed(seed, "init"));
    std::size_t fan_in = inputs;
    auto add_layer = [&](std::size_t outputs, double limit) {
        DenseLayer layer;
        layer.weights.resize(static_cast<Eigen::Index>(outputs), static_cast<Eigen::Index>(fan_in));
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                layer.weights(r, c) = rng.uniform(-limit, limit);
            }
        }
        layer.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(outputs));
        model.layers.push_back(std::move(layer));
        fan_in = outputs;
    };
    for (auto width : hidden) {
        if (width == 0) {
            throw UsageError("hidden layer width must be positive");
        }
        // He uniform for rectifier layers
        add_layer(width, std::sqrt(6.0 / static_cast<double>(fan_in)));
    }
    // Glorot uniform for the logistic output
    add_layer(1, std::sqrt(6.0 / static_cast<double>(fan_in + 1)));
    snap_to_float32(model);
    model.validate();
    return model;
}

void snap_to_float32(MlpModel& model)
{
    auto snap = [](double v) { return static_cast<double>(static_cast<float>(v)); };
    for (auto& layer : model.layers) {
        layer.weights = layer.weights.unaryExpr(snap);
        layer.bias = layer.bias.unaryExpr(snap);
    }
}

void TrainConfig::validate() const
{
    if (!(learning_rate > 0.0)) {
        throw UsageError("learning rate must be positive");
    }
    if (epochs < 0) {
        throw UsageError("epochs must be non-negative");
    }
    if (batch_size < 1) {
        throw UsageError("batch size must be at least 1");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
        throw UsageError("Adam hyperparameters out of range");
    }
}

namespace {

// Activations recorded by a forward pass, for backpropagation.
struct Trace {
    std::vector<Eigen::MatrixXd> raw_inputs;  // layer input before fake quantization
    std::vector<Eigen::MatrixXd> inputs;      // layer input as used in the product
    std::vector<Eigen::MatrixXd> pre;         // pre-activations
    std::vector<Eigen::MatrixXd> masks;       // scaled dropout masks (empty if none)
    Eigen::VectorXd logits;
};

void check_input(const MlpModel& model, const Eigen::MatrixXd& x)
{
    model.validate();
    if (static_cast<std::size_t>(x.cols()) != model.input_width()) {
        throw UsageError(fmt::format("model expects {} features, got {}", model.input_width(), x.cols()));
    }
}

const ActivationQuantizer* quantizer_for(const MlpModel& model, std::size_t layer)
{
    if (model.input_quantizers.empty() || !model.input_quantizers[layer]) {
        return nullptr;
    }
    return &*model.input_quantizers[layer];
}

Trace run_forward(const MlpModel& model, const Eigen::MatrixXd& x, bool training, Rng* rng, bool keep)
{
    if (training && rng == nullptr) {
        bool any_dropout = std::any_of(model.dropout_rates.begin(), model.dropout_rates.end(),
                                       [](double r) { return r > 0.0; });
        if (any_dropout) {
            throw UsageError("training-mode forward pass with dropout needs a generator");
        }
    }
    Trace trace;
    Eigen::MatrixXd a = x;  // rows = instances
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& layer = model.layers[l];
        Eigen::MatrixXd in = a;
        if (const auto* q = quantizer_for(model, l)) {
            in = a.unaryExpr([q](double v) { return q->apply(v); });
        }
        Eigen::MatrixXd z = in * layer.weights.transpose();
        z.rowwise() += layer.bias.transpose();
        if (keep) {
            trace.raw_inputs.push_back(std::move(a));
            trace.inputs.push_back(in);
        }
        if (l + 1 == model.layers.size()) {
            trace.logits = z.col(0);
            if (keep) {
                trace.pre.push_back(std::move(z));
            }
            break;
        }
        Eigen::MatrixXd h = z.cwiseMax(0.0);
        Eigen::MatrixXd mask;
        const double rate = model.dropout_rates[l];
        if (training && rate > 0.0) {
            const double keep_scale = 1.0 / (1.0 - rate);
            mask.resize(h.rows(), h.cols());
            for (Eigen::Index c = 0; c < mask.cols(); ++c) {
                for (Eigen::Index r = 0; r < mask.rows(); ++r) {
                    mask(r, c) = rng->bernoulli(rate) ? 0.0 : keep_scale;
                }
            }
            h = h.cwiseProduct(mask);
        }
        if (keep) {
            trace.pre.push_back(std::move(z));
            trace.masks.push_back(std::move(mask));
        }
        a = std::move(h);
    }
    return trace;
}

double sigmoid(double z)
{
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double bce_from_logit(double z, double y)
{
    return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

double mean_bce(const Eigen::VectorXd& logits, std::span<const std::uint8_t> y)
{
    double sum = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        sum += bce_from_logit(logits(i), y[static_cast<std::size_t>(i)]);
    }
    return sum / static_cast<double>(logits.size());
}

void check_labels(const Eigen::MatrixXd& x, std::span<const std::uint8_t> y)
{
    if (static_cast<std::size_t>(x.rows()) != y.size()) {
        throw UsageError(fmt::format("{} feature rows but {} labels", x.rows(), y.size()));
    }
    if (y.empty()) {
        throw UsageError("no training instances");
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] > 1) {
            throw DataError(fmt::format("label at index {} is not binary", i));
        }
    }
}

}  // namespace

Eigen::VectorXd forward_logits(const MlpModel& model, const Eigen::MatrixXd& x, bool training, Rng* rng)
{
    check_input(model, x);
    return run_forward(model, x, training, rng, false).logits;
}

Eigen::VectorXd forward(const MlpModel& model, const Eigen::MatrixXd& x, bool training, Rng* rng)
{
    const auto logits = forward_logits(model, x, training, rng);
    const double lo = std::numeric_limits<double>::min();
    const double hi = std::nextafter(1.0, 0.0);
    return logits.unaryExpr([&](double z) { return std::clamp(sigmoid(z), lo, hi); });
}

BinaryVector threshold_labels(const Eigen::VectorXd& probabilities, double threshold)
{
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw UsageError(fmt::format("label threshold {} outside (0, 1)", threshold));
    }
    BinaryVector out(static_cast<std::size_t>(probabilities.size()));
    for (Eigen::Index i = 0; i < probabilities.size(); ++i) {
        out[static_cast<std::size_t>(i)] = probabilities(i) >= threshold ? 1 : 0;
    }
    return out;
}

BinaryVector predict_labels(const MlpModel& model, const Eigen::MatrixXd& x, double threshold)
{
    return threshold_labels(forward(model, x), threshold);
}

double bce_loss(const MlpModel& model, const Eigen::MatrixXd& x, std::span<const std::uint8_t> y)
{
    check_labels(x, y);
    return mean_bce(forward_logits(model, x), y);
}

LossAndGradients loss_and_gradients(const MlpModel& model, const Eigen::MatrixXd& x,
                                    std::span<const std::uint8_t> y, bool training, Rng* rng)
{
    check_input(model, x);
    check_labels(x, y);
    const Trace trace = run_forward(model, x, training, rng, true);
    const auto n = static_cast<double>(y.size());
    const std::size_t depth = model.layers.size();

    LossAndGradients out;
    out.loss = mean_bce(trace.logits, y);
    out.gradients.weights.resize(depth);
    out.gradients.bias.resize(depth);

    Eigen::MatrixXd delta(trace.logits.size(), 1);
    for (Eigen::Index i = 0; i < trace.logits.size(); ++i) {
        delta(i, 0) = (sigmoid(trace.logits(i)) - y[static_cast<std::size_t>(i)]) / n;
    }
    for (std::size_t l = depth; l-- > 0;) {
        out.gradients.weights[l] = delta.transpose() * trace.inputs[l];
        out.gradients.bias[l] = delta.colwise().sum().transpose();
        if (l == 0) {
            break;
        }
        Eigen::MatrixXd upstream = delta * model.layers[l].weights;
        if (const auto* q = quantizer_for(model, l)) {
            const auto& raw = trace.raw_inputs[l];
            upstream = upstream.cwiseProduct(
                raw.unaryExpr([q](double v) { return q->passes_gradient(v) ? 1.0 : 0.0; }));
        }
        if (trace.masks[l - 1].size() > 0) {
            upstream = upstream.cwiseProduct(trace.masks[l - 1]);
        }
        delta = upstream.cwiseProduct(
            trace.pre[l - 1].unaryExpr([](double z) { return z > 0.0 ? 1.0 : 0.0; }));
    }
    return out;
}

std::int64_t steps_per_epoch(std::size_t rows, std::size_t batch_size)
{
    return static_cast<std::int64_t>((rows + batch_size - 1) / batch_size);
}

TrainResult train(MlpModel model, const Eigen::MatrixXd& x, std::span<const std::uint8_t> y,
                  const TrainConfig& cfg, const TrainHooks& hooks)
{
    cfg.validate();
    check_input(model, x);
    check_labels(x, y);

    TrainResult result;
    if (cfg.epochs == 0) {
        result.model = std::move(model);
        return result;
    }

    const std::size_t depth = model.layers.size();
    std::vector<Eigen::MatrixXd> m_w(depth), v_w(depth);
    std::vector<Eigen::VectorXd> m_b(depth), v_b(depth);
    for (std::size_t l = 0; l < depth; ++l) {
        m_w[l] = Eigen::MatrixXd::Zero(model.layers[l].weights.rows(), model.layers[l].weights.cols());
        v_w[l] = m_w[l];
        m_b[l] = Eigen::VectorXd::Zero(model.layers[l].bias.size());
        v_b[l] = m_b[l];
    }

    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
    Rng dropout_rng(derive_seed(cfg.seed, "dropout"));
    std::vector<std::size_t> order(y.size());
    std::iota(order.begin(), order.end(), 0);

    std::int64_t step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(std::span<std::size_t>(order));
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            const auto rows = static_cast<Eigen::Index>(stop - start);
            Eigen::MatrixXd xb(rows, x.cols());
            BinaryVector yb(static_cast<std::size_t>(rows));
            for (Eigen::Index i = 0; i < rows; ++i) {
                const auto src = order[start + static_cast<std::size_t>(i)];
                xb.row(i) = x.row(static_cast<Eigen::Index>(src));
                yb[static_cast<std::size_t>(i)] = y[src];
            }

            if (hooks.before_step) {
                hooks.before_step(model, step);
            }
            LossAndGradients lg = hooks.forward_view
                                      ? loss_and_gradients(hooks.forward_view(model), xb, yb, true, &dropout_rng)
                                      : loss_and_gradients(model, xb, yb, true, &dropout_rng);
            if (!std::isfinite(lg.loss)) {
                throw StatError(fmt::format("training loss became non-finite at epoch {}, step {}",
                                            epoch, step));
            }
            epoch_loss += lg.loss * static_cast<double>(rows);

            ++step;
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            auto adam = [&](auto& param, auto& m, auto& v, const auto& g) {
                m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
                v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
                param.array() -= cfg.learning_rate * (m.array() / bc1) /
                                 ((v.array() / bc2).sqrt() + cfg.epsilon);
            };
            for (std::size_t l = 0; l < depth; ++l) {
                adam(model.layers[l].weights, m_w[l], v_w[l], lg.gradients.weights[l]);
                adam(model.layers[l].bias, m_b[l], v_b[l], lg.gradients.bias[l]);
            }
            if (hooks.after_update) {
                hooks.after_update(model);
            }
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(order.size()));
    }
    snap_to_float32(model);
    if (hooks.after_update) {
        hooks.after_update(model);
    }
    result.model = std::move(model);
    result.steps = step;
    return result;
}

}  // namespace faithgate
