// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "faithgate/compress.hpp"
#include "faithgate/datatab.hpp"
#include "faithgate/nnet.hpp"

namespace faithgate {

struct ModelSpec {
    std::vector<std::size_t> hidden{64, 32, 16};
    std::vector<double> dropout{0.1, 0.1, 0.0};
};

struct PruneStage {
    bool enabled = true;
    PruneSchedule schedule;
    bool end_step_set = false;  // otherwise 3/4 of the fine-tuning steps
    int epochs = 4;
};

struct QuantizeStage {
    bool enabled = true;
    QuantSpec spec;
};

struct ExperimentSettings {
    int runs = 10;
    std::uint64_t seed = 42;
    double threshold = 0.05;
    std::optional<double> validation_threshold;  // defaults to `threshold`
    bool yates = true;
    double label_threshold = 0.5;
    int threads = 1;
};

struct ExperimentConfig {
    std::filesystem::path data_path;  // resolved against the config file's directory
    std::string data_path_text;       // as written
    CsvSchema schema;
    std::vector<SubgroupSpec> subgroups;
    SplitSpec split{0.7, 0.15, 0.15, 0};
    ModelSpec model;
    TrainConfig train;
    PruneStage prune;
    QuantizeStage quantize;
    ExperimentSettings experiment;

    double validation_threshold() const { return experiment.validation_threshold.value_or(experiment.threshold); }
    // Everything, including the [data] section needed to run the pipeline.
    void validate() const;
    // Everything except [data]; enough for auditing prediction files.
    void validate_settings() const;
};

// Parses the TOML experiment description. Unknown keys are rejected; the
// [data] section may be omitted.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace faithgate
