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

#include "dpens/csv.h"

#include <charconv>
#include <cmath>
#include <system_error>

#include "dpens/error.h"

namespace dpens {
namespace {

std::string_view TrimLineEnd(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<std::string> SplitCsvLine(std::string_view line) {
  std::vector<std::string> fields;
  size_t start = 0;
  while (true) {
    size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.emplace_back(Trim(line.substr(start)));
      break;
    }
    fields.emplace_back(Trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

std::vector<CsvRow> ReadCsv(const std::filesystem::path& path, std::string_view header) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::string line;
  size_t line_no = 0;
  std::vector<CsvRow> rows;
  bool have_header = false;
  const size_t n_fields = SplitCsvLine(header).size();
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = TrimLineEnd(line);
    if (line_no == 1 && view.size() >= 3 && view.substr(0, 3) == "\xEF\xBB\xBF") {
      view.remove_prefix(3);  // UTF-8 BOM
    }
    if (Trim(view).empty()) continue;
    if (!have_header) {
      if (view != header) {
        throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(line_no) +
                                           ": expected header '" + std::string(header) + "'");
      }
      have_header = true;
      continue;
    }
    CsvRow row{line_no, SplitCsvLine(view)};
    if (row.fields.size() != n_fields) {
      throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                         std::to_string(n_fields) + " fields, got " +
                                         std::to_string(row.fields.size()));
    }
    rows.push_back(std::move(row));
  }
  if (!have_header) {
    throw Error(ErrorCode::kParse, path.string() + ": missing header");
  }
  return rows;
}

double ParseDouble(std::string_view field, size_t line) {
  double value = 0.0;
  if (field == "nan") return std::nan("");
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw Error(ErrorCode::kParse,
                "line " + std::to_string(line) + ": not a number: '" + std::string(field) + "'");
  }
  return value;
}

long long ParseInt(std::string_view field, size_t line) {
  long long value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw Error(ErrorCode::kParse,
                "line " + std::to_string(line) + ": not an integer: '" + std::string(field) + "'");
  }
  return value;
}

std::string FormatDouble(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::string_view header)
    : out_(path, std::ios::binary) {
  if (!out_) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out_ << header << '\n';
}

void CsvWriter::Separator() {
  if (row_started_) out_ << ',';
  row_started_ = true;
}

CsvWriter& CsvWriter::operator<<(std::string_view field) {
  Separator();
  out_ << field;
  return *this;
}

CsvWriter& CsvWriter::operator<<(double value) {
  Separator();
  out_ << FormatDouble(value);
  return *this;
}

CsvWriter& CsvWriter::operator<<(long long value) {
  Separator();
  out_ << value;
  return *this;
}

void CsvWriter::EndRow() {
  out_ << '\n';
  row_started_ = false;
  if (!out_) throw Error(ErrorCode::kIo, "write failed");
}

}  // namespace dpens
