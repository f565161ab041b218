// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace faithgate {

// In-memory RFC 4180 style table: a header row plus string cells.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based source line of each row

    // Index of `name` in the header, or npos.
    std::size_t column(std::string_view name) const;
};

CsvTable parse_csv(std::istream& in, char delimiter = ',');
CsvTable read_csv(const std::filesystem::path& path, char delimiter = ',');

std::string csv_escape(std::string_view cell, char delimiter = ',');
void write_csv_row(std::ostream& out, const std::vector<std::string>& cells, char delimiter = ',');

std::string trim(std::string_view s);

}  // namespace faithgate
