// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "faithgate/compress.hpp"
#include "faithgate/datatab.hpp"
#include "faithgate/nnet.hpp"

namespace faithgate {

inline constexpr int kCheckpointVersion = 1;

// Where a compressed model came from.
struct CompressionRecord {
    std::string method = "none";  // none | prune | quantize
    std::uint64_t seed = 0;
    nlohmann::json settings = nlohmann::json::object();
    std::vector<Eigen::MatrixXd> masks;    // prune: one 0/1 mask per layer
    std::vector<QuantizedTensor> tensors;  // quantize: integer codes per tensor
};

struct ModelCheckpoint {
    MlpModel model;
    std::vector<std::string> feature_names;
    std::optional<Standardizer> standardizer;
    CompressionRecord compression;
};

// Versioned JSON container. Parameters are written as 32-bit floats, masks as
// hex bitmaps (row-major, most significant bit first).
nlohmann::json checkpoint_to_json(const ModelCheckpoint& checkpoint);
ModelCheckpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const std::filesystem::path& path, const ModelCheckpoint& checkpoint);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

std::string mask_to_hex(const Eigen::MatrixXd& mask);
Eigen::MatrixXd mask_from_hex(const std::string& hex, Eigen::Index rows, Eigen::Index cols);

}  // namespace faithgate
