// Copyright 2026 The Faithgate Authors
// SPDX-License-Identifier: Apache-2.0

#include "faithgate/csv.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "faithgate/error.hpp"

namespace faithgate {

std::size_t CsvTable::column(std::string_view name) const
{
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) {
            return i;
        }
    }
    return std::string_view::npos;
}

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

CsvTable parse_csv(std::istream& in, char delimiter)
{
    CsvTable table;
    std::vector<std::string> record;
    std::string cell;
    bool in_quotes = false;
    bool cell_was_quoted = false;
    bool have_content = false;
    std::size_t line = 1;
    std::size_t record_line = 1;

    auto finish_cell = [&] {
        record.push_back(cell_was_quoted ? cell : trim(cell));
        cell.clear();
        cell_was_quoted = false;
    };
    auto finish_record = [&] {
        finish_cell();
        const bool blank = record.size() == 1 && record.front().empty();
        if (!blank) {
            if (table.header.empty()) {
                table.header = std::move(record);
            } else {
                if (record.size() != table.header.size()) {
                    throw DataError(fmt::format("csv line {}: expected {} fields, found {}",
                                                record_line, table.header.size(), record.size()));
                }
                table.rows.push_back(std::move(record));
                table.line_numbers.push_back(record_line);
            }
        }
        record.clear();
        have_content = false;
    };

    char ch = 0;
    while (in.get(ch)) {
        if (in_quotes) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    in.get(ch);
                    cell.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                if (ch == '\n') {
                    ++line;
                }
                cell.push_back(ch);
            }
            continue;
        }
        if (ch == '"' && trim(cell).empty()) {
            cell.clear();
            in_quotes = true;
            cell_was_quoted = true;
            have_content = true;
        } else if (ch == delimiter) {
            finish_cell();
            have_content = true;
        } else if (ch == '\n') {
            finish_record();
            ++line;
            record_line = line;
        } else if (ch == '\r') {
            // CRLF line endings
        } else {
            cell.push_back(ch);
            have_content = true;
        }
    }
    if (in_quotes) {
        throw DataError(fmt::format("csv line {}: unterminated quoted field", record_line));
    }
    if (have_content || !cell.empty()) {
        finish_record();
    }
    if (table.header.empty()) {
        throw DataError("csv input has no header row");
    }
    return table;
}

CsvTable read_csv(const std::filesystem::path& path, char delimiter)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError(fmt::format("cannot open '{}'", path.string()));
    }
    // skip a UTF-8 byte order mark
    if (in.peek() == 0xEF) {
        char bom[3];
        in.read(bom, 3);
        if (!(static_cast<unsigned char>(bom[1]) == 0xBB && static_cast<unsigned char>(bom[2]) == 0xBF)) {
            in.seekg(0);
        }
    }
    try {
        return parse_csv(in, delimiter);
    } catch (const DataError& e) {
        throw DataError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

std::string csv_escape(std::string_view cell, char delimiter)
{
    const bool needs_quotes = cell.find(delimiter) != std::string_view::npos ||
                              cell.find('"') != std::string_view::npos ||
                              cell.find('\n') != std::string_view::npos ||
                              cell.find('\r') != std::string_view::npos;
    if (!needs_quotes) {
        return std::string(cell);
    }
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') {
            out.push_back('"');
        }
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& cells, char delimiter)
{
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i > 0) {
            out << delimiter;
        }
        out << csv_escape(cells[i], delimiter);
    }
    out << '\n';
}

}  // namespace faithgate
