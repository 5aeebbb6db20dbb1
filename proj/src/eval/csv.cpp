// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#include "lldx/eval/csv.hpp"

#include <charconv>
#include <fstream>

#include "lldx/error.hpp"

namespace lldx {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, std::string_view field) {
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ParseError("field " + std::string(field) + ": '" + std::string(text) +
                     "' is not a number");
  }
  return v;
}

std::vector<std::string> split_fields(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t at = 0;
  while (true) {
    const std::size_t next = line.find(sep, at);
    out.emplace_back(line.substr(at, next == std::string_view::npos ? line.npos : next - at));
    if (next == std::string_view::npos) break;
    at = next + 1;
  }
  return out;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path,
                                               const std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file", 1);
  if (split_fields(line) != header) throw ParseError(path + ": unexpected header", 1);
  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError(path + ": expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

}  // namespace lldx
