// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#include "faithgate/checkpoint.hpp"

#include <fstream>

#include <fmt/format.h>

#include "faithgate/error.hpp"

namespace faithgate {

using nlohmann::json;

namespace {

json floats(const Eigen::MatrixXd& m)
{
    json out = json::array();
    for (double v : flatten(m)) {
        out.push_back(static_cast<float>(v));
    }
    return out;
}

json floats(const Eigen::VectorXd& v)
{
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(static_cast<float>(v(i)));
    }
    return out;
}

json doubles(const Eigen::VectorXd& v)
{
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(v(i));
    }
    return out;
}

Eigen::VectorXd read_vector(const json& arr, Eigen::Index expected, const char* what)
{
    if (!arr.is_array() || static_cast<Eigen::Index>(arr.size()) != expected) {
        throw DataError(fmt::format("checkpoint: '{}' must hold {} numbers", what, expected));
    }
    Eigen::VectorXd v(expected);
    for (Eigen::Index i = 0; i < expected; ++i) {
        v(i) = arr[static_cast<std::size_t>(i)].get<double>();
    }
    return v;
}

}  // namespace

std::string mask_to_hex(const Eigen::MatrixXd& mask)
{
    const auto flat = flatten(mask);
    std::string out;
    static constexpr char kDigits[] = "0123456789abcdef";
    for (std::size_t i = 0; i < flat.size(); i += 4) {
        int nibble = 0;
        for (std::size_t b = 0; b < 4; ++b) {
            nibble <<= 1;
            if (i + b < flat.size() && flat[i + b] != 0.0) {
                nibble |= 1;
            }
        }
        out.push_back(kDigits[nibble]);
    }
    return out;
}

Eigen::MatrixXd mask_from_hex(const std::string& hex, Eigen::Index rows, Eigen::Index cols)
{
    const auto n = static_cast<std::size_t>(rows * cols);
    if (hex.size() != (n + 3) / 4) {
        throw DataError("checkpoint: mask bitmap length does not match layer shape");
    }
    Eigen::MatrixXd mask(rows, cols);
    for (std::size_t i = 0; i < n; ++i) {
        const char c = hex[i / 4];
        int nibble = 0;
        if (c >= '0' && c <= '9') {
            nibble = c - '0';
        } else if (c >= 'a' && c <= 'f') {
            nibble = c - 'a' + 10;
        } else {
            throw DataError("checkpoint: mask bitmap is not lowercase hex");
        }
        const int bit = (nibble >> (3 - static_cast<int>(i % 4))) & 1;
        mask(static_cast<Eigen::Index>(i / static_cast<std::size_t>(cols)),
             static_cast<Eigen::Index>(i % static_cast<std::size_t>(cols))) = bit;
    }
    return mask;
}

json checkpoint_to_json(const ModelCheckpoint& ckpt)
{
    const auto& model = ckpt.model;
    model.validate();
    json doc;
    doc["format"] = "faithgate.mlp";
    doc["version"] = kCheckpointVersion;
    doc["seed"] = model.seed;
    doc["hidden_activation"] = "relu";
    doc["output_activation"] = "sigmoid";
    doc["dropout_rates"] = model.dropout_rates;
    doc["feature_names"] = ckpt.feature_names;
    json layers = json::array();
    for (const auto& layer : model.layers) {
        layers.push_back({{"inputs", layer.weights.cols()},
                          {"outputs", layer.weights.rows()},
                          {"weights", floats(layer.weights)},
                          {"bias", floats(layer.bias)}});
    }
    doc["layers"] = std::move(layers);
    json quantizers = json::array();
    for (const auto& q : model.input_quantizers) {
        quantizers.push_back(q ? json{{"lo", q->lo}, {"hi", q->hi}, {"bits", q->bits}} : json(nullptr));
    }
    doc["activation_quantizers"] = std::move(quantizers);
    if (ckpt.standardizer) {
        doc["standardizer"] = {{"mean", doubles(ckpt.standardizer->mean)},
                               {"scale", doubles(ckpt.standardizer->scale)}};
    } else {
        doc["standardizer"] = nullptr;
    }

    const auto& comp = ckpt.compression;
    json c = {{"method", comp.method}, {"seed", comp.seed}, {"settings", comp.settings}};
    if (!comp.masks.empty()) {
        json masks = json::array();
        for (const auto& m : comp.masks) {
            masks.push_back(mask_to_hex(m));
        }
        c["masks"] = std::move(masks);
    }
    if (!comp.tensors.empty()) {
        json tensors = json::array();
        for (const auto& t : comp.tensors) {
            tensors.push_back({{"bits", t.bits}, {"range", static_cast<float>(t.range)}, {"codes", t.codes}});
        }
        c["tensors"] = std::move(tensors);
    }
    doc["compression"] = std::move(c);
    return doc;
}

ModelCheckpoint checkpoint_from_json(const json& doc)
{
    try {
        if (doc.value("format", "") != "faithgate.mlp") {
            throw DataError("checkpoint: unrecognised format tag");
        }
        const int version = doc.at("version").get<int>();
        if (version != kCheckpointVersion) {
            throw DataError(fmt::format("checkpoint: unsupported version {}", version));
        }
        ModelCheckpoint ckpt;
        auto& model = ckpt.model;
        model.seed = doc.at("seed").get<std::uint64_t>();
        model.dropout_rates = doc.at("dropout_rates").get<std::vector<double>>();
        ckpt.feature_names = doc.value("feature_names", std::vector<std::string>{});
        for (const auto& layer_doc : doc.at("layers")) {
            const auto in = layer_doc.at("inputs").get<Eigen::Index>();
            const auto out = layer_doc.at("outputs").get<Eigen::Index>();
            DenseLayer layer;
            const auto w = read_vector(layer_doc.at("weights"), in * out, "weights");
            layer.weights.resize(out, in);
            for (Eigen::Index r = 0; r < out; ++r) {
                for (Eigen::Index c = 0; c < in; ++c) {
                    layer.weights(r, c) = w(r * in + c);
                }
            }
            layer.bias = read_vector(layer_doc.at("bias"), out, "bias");
            model.layers.push_back(std::move(layer));
        }
        for (const auto& q : doc.value("activation_quantizers", json::array())) {
            if (q.is_null()) {
                model.input_quantizers.emplace_back();
            } else {
                model.input_quantizers.emplace_back(
                    ActivationQuantizer{q.at("lo").get<double>(), q.at("hi").get<double>(), q.at("bits").get<int>()});
            }
        }
        model.validate();
        if (doc.contains("standardizer") && !doc["standardizer"].is_null()) {
            const auto width = static_cast<Eigen::Index>(model.input_width());
            Standardizer s;
            s.mean = read_vector(doc["standardizer"].at("mean"), width, "standardizer.mean");
            s.scale = read_vector(doc["standardizer"].at("scale"), width, "standardizer.scale");
            ckpt.standardizer = std::move(s);
        }
        const auto& c = doc.at("compression");
        auto& comp = ckpt.compression;
        comp.method = c.at("method").get<std::string>();
        comp.seed = c.at("seed").get<std::uint64_t>();
        comp.settings = c.value("settings", json::object());
        if (c.contains("masks")) {
            const auto& masks = c["masks"];
            if (masks.size() != model.layers.size()) {
                throw DataError("checkpoint: one mask per layer is required");
            }
            for (std::size_t l = 0; l < masks.size(); ++l) {
                const auto& w = model.layers[l].weights;
                comp.masks.push_back(mask_from_hex(masks[l].get<std::string>(), w.rows(), w.cols()));
            }
        }
        if (c.contains("tensors")) {
            for (const auto& t : c["tensors"]) {
                QuantizedTensor qt;
                qt.bits = t.at("bits").get<int>();
                qt.range = t.at("range").get<double>();
                qt.codes = t.at("codes").get<std::vector<std::int32_t>>();
                comp.tensors.push_back(std::move(qt));
            }
            if (comp.tensors.size() != 2 * model.layers.size()) {
                throw DataError("checkpoint: expected one code tensor per weight matrix and bias");
            }
            // parameters are defined by the codes
            for (std::size_t l = 0; l < model.layers.size(); ++l) {
                auto& layer = model.layers[l];
                const auto w = comp.tensors[2 * l].dequantize();
                const auto b = comp.tensors[2 * l + 1].dequantize();
                if (static_cast<Eigen::Index>(w.size()) != layer.weights.size() ||
                    static_cast<Eigen::Index>(b.size()) != layer.bias.size()) {
                    throw DataError(fmt::format("checkpoint: code tensor shape mismatch in layer {}", l));
                }
                for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
                    for (Eigen::Index k = 0; k < layer.weights.cols(); ++k) {
                        layer.weights(r, k) = w[static_cast<std::size_t>(r * layer.weights.cols() + k)];
                    }
                }
                layer.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
            }
        }
        return ckpt;
    } catch (const json::exception& e) {
        throw DataError(fmt::format("checkpoint: malformed document ({})", e.what()));
    }
}

void save_checkpoint(const std::filesystem::path& path, const ModelCheckpoint& checkpoint)
{
    std::ofstream out(path);
    if (!out) {
        throw DataError(fmt::format("cannot write '{}'", path.string()));
    }
    out << checkpoint_to_json(checkpoint).dump(1) << '\n';
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError(fmt::format("cannot open model file '{}'", path.string()));
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(fmt::format("'{}' is not valid JSON ({})", path.string(), e.what()));
    }
    try {
        return checkpoint_from_json(doc);
    } catch (const DataError& e) {
        throw DataError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

}  // namespace faithgate
