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

#ifndef SLICEFORMER_TOOLS_CSV_HPP_
#define SLICEFORMER_TOOLS_CSV_HPP_

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>

namespace sf::cli {

// Shortest text that reads back to the same double.
std::string format_number(double value);

class CsvTable {
 public:
  explicit CsvTable(std::initializer_list<std::string_view> header);

  CsvTable& cell(double value);
  CsvTable& cell(std::size_t value);
  CsvTable& cell(std::int64_t value);
  CsvTable& cell(std::string_view value);
  void end_row();

  const std::string& text() const { return text_; }

 private:
  void separator();

  std::string text_;
  bool row_open_ = false;
};

// Writes to a sibling temporary file, then renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace sf::cli

#endif  // SLICEFORMER_TOOLS_CSV_HPP_
