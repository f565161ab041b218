// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>

#include <json.hpp>

namespace faithgate {

// Markdown tables rendered only from the JSON report, so every printed number
// can be traced back to it.
std::string render_markdown(const nlohmann::json& report);

// "0.896 (0.0103)": mean at `decimals`, sample std at decimals + 1.
std::string format_aggregate(const nlohmann::json& aggregate, int decimals = 3);
std::string format_fixed(double value, int decimals);
// 0.0091 -> "0.9%"
std::string format_percent(const nlohmann::json& fraction);

}  // namespace faithgate
