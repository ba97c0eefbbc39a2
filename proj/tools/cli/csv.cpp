/* Copyright 2026 The Sliceformer Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "cli/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <system_error>

#include <stdexcept>

namespace sf::cli {

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), end);
}

CsvTable::CsvTable(std::initializer_list<std::string_view> header) {
  for (std::string_view h : header) cell(h);
  end_row();
}

void CsvTable::separator() {
  if (row_open_) text_ += ',';
  row_open_ = true;
}

CsvTable& CsvTable::cell(double value) {
  separator();
  text_ += format_number(value);
  return *this;
}

CsvTable& CsvTable::cell(std::size_t value) {
  separator();
  text_ += std::to_string(value);
  return *this;
}

CsvTable& CsvTable::cell(std::int64_t value) {
  separator();
  text_ += std::to_string(value);
  return *this;
}

CsvTable& CsvTable::cell(std::string_view value) {
  separator();
  text_ += value;
  return *this;
}

void CsvTable::end_row() {
  text_ += '\n';
  row_open_ = false;
}

void write_atomic(const std::filesystem::path& path, std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw std::runtime_error("cannot replace " + path.string());
  }
}

}  // namespace sf::cli
