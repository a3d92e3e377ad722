// SPDX-License-Identifier: Apache-2.0
#pragma once

// Minimal RFC 4180 reader/writer: quoted fields, doubled quotes, no embedded
// newlines inside records.

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "cdt/common/error.hpp"

namespace cdt::csv {

inline std::vector<std::string> parse_line(std::string_view line, std::size_t line_no = 0) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            if (!cur.empty() || was_quoted) throw ParseError("stray quote in CSV field", line_no);
            quoted = was_quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
            was_quoted = false;
        } else {
            if (was_quoted) throw ParseError("text after closing quote", line_no);
            cur += c;
        }
    }
    if (quoted) throw ParseError("unterminated quoted CSV field", line_no);
    fields.push_back(std::move(cur));
    return fields;
}

inline std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline void write_row(std::ostream& os, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) os << ',';
        os << escape(fields[i]);
    }
    os << '\n';
}

/// Reads all rows; strips a trailing '\r'. Returns rows with their line numbers.
struct Row {
    std::size_t line;
    std::vector<std::string> fields;
};

inline std::vector<Row> read_all(std::istream& is) {
    std::vector<Row> rows;
    std::string line;
    std::size_t n = 0;
    while (std::getline(is, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back({n, parse_line(line, n)});
    }
    return rows;
}

}  // namespace cdt::csv
