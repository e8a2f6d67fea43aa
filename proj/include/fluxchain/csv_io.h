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

#ifndef FLUXCHAIN_CSV_IO_H
#define FLUXCHAIN_CSV_IO_H

#include <string>
#include <string_view>
#include <vector>

#include "fluxchain/common.h"

namespace fluxchain {

/// Shortest text that round-trips is not used on purpose: every number is
/// printed with 17 significant digits so output bytes are reproducible.
std::string format_double(double x);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of a header column; throws Error if absent.
    size_t column(std::string_view name) const;
    /// Column parsed as doubles; throws Error naming the row on bad input.
    std::vector<double> numeric_column(std::string_view name) const;
};

/// Comma-separated text with a header row. Blank lines are skipped.
CsvTable parse_csv(std::string_view text);
CsvTable read_csv_file(const std::string &path);

class CsvWriter {
  public:
    explicit CsvWriter(std::vector<std::string> header);
    CsvWriter &row(const std::vector<double> &values);
    CsvWriter &row(const std::vector<std::string> &cells);
    const std::string &str() const { return text_; }

  private:
    size_t width_;
    std::string text_;
};

std::string read_text_file(const std::string &path);
void write_text_file(const std::string &path, std::string_view text);

}  // namespace fluxchain

#endif
