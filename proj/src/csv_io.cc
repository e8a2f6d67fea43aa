// Copyright 2026 The fluxchain Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fluxchain/csv_io.h"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fluxchain/common.h"

namespace fluxchain {

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(',', start);
        out.emplace_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace

size_t CsvTable::column(std::string_view name) const {
    for (size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw Error("csv: missing column " + std::string(name));
}

std::vector<double> CsvTable::numeric_column(std::string_view name) const {
    size_t c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (size_t r = 0; r < rows.size(); ++r) {
        const std::string &cell = rows[r][c];
        char *end = nullptr;
        errno = 0;
        double v = std::strtod(cell.c_str(), &end);
        if (cell.empty() || *end != '\0' || errno == ERANGE) {
            throw Error("csv: bad number '" + cell + "' in column " + std::string(name) +
                        " at data row " + std::to_string(r + 1));
        }
        out.push_back(v);
    }
    return out;
}

CsvTable parse_csv(std::string_view text) {
    CsvTable t;
    size_t start = 0;
    size_t line_no = 0;
    while (start <= text.size()) {
        size_t pos = text.find('\n', start);
        std::string_view line = text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        ++line_no;
        if (!trim(line).empty()) {
            auto cells = split(line);
            if (t.header.empty()) {
                t.header = std::move(cells);
            } else {
                if (cells.size() != t.header.size()) {
                    throw Error("csv: line " + std::to_string(line_no) + " has " +
                                std::to_string(cells.size()) + " fields, expected " +
                                std::to_string(t.header.size()));
                }
                t.rows.push_back(std::move(cells));
            }
        }
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    if (t.header.empty()) throw Error("csv: empty input");
    return t;
}

CsvTable read_csv_file(const std::string &path) { return parse_csv(read_text_file(path)); }

CsvWriter::CsvWriter(std::vector<std::string> header) : width_(header.size()) {
    for (size_t i = 0; i < header.size(); ++i) {
        if (i) text_ += ',';
        text_ += header[i];
    }
    text_ += '\n';
}

CsvWriter &CsvWriter::row(const std::vector<double> &values) {
    if (values.size() != width_) throw Error("csv: row width mismatch");
    for (size_t i = 0; i < values.size(); ++i) {
        if (i) text_ += ',';
        text_ += format_double(values[i]);
    }
    text_ += '\n';
    return *this;
}

CsvWriter &CsvWriter::row(const std::vector<std::string> &cells) {
    if (cells.size() != width_) throw Error("csv: row width mismatch");
    for (size_t i = 0; i < cells.size(); ++i) {
        if (i) text_ += ',';
        text_ += cells[i];
    }
    text_ += '\n';
    return *this;
}

std::string read_text_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string &path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error("write failed: " + path);
}

}  // namespace fluxchain
