// Copyright 2026 The dpens Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPENS_CSV_H_
#define DPENS_CSV_H_

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dpens {

struct CsvRow {
  size_t line = 0;  // 1-based line number in the source file
  std::vector<std::string> fields;
};

// Reads a comma-separated file whose first line must equal `header` exactly.
// Blank lines are skipped. Rows with a field count different from the header
// raise a parse error naming the line.
std::vector<CsvRow> ReadCsv(const std::filesystem::path& path, std::string_view header);

std::vector<std::string> SplitCsvLine(std::string_view line);

double ParseDouble(std::string_view field, size_t line);
long long ParseInt(std::string_view field, size_t line);

// Shortest representation that parses back to the identical double.
std::string FormatDouble(double value);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::string_view header);

  CsvWriter& operator<<(std::string_view field);
  CsvWriter& operator<<(double value);
  CsvWriter& operator<<(long long value);
  CsvWriter& operator<<(int value) { return *this << static_cast<long long>(value); }
  CsvWriter& operator<<(size_t value) { return *this << static_cast<long long>(value); }
  void EndRow();

 private:
  void Separator();

  std::ofstream out_;
  bool row_started_ = false;
};

}  // namespace dpens

#endif  // DPENS_CSV_H_
