// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace lldx {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
/// Strict inverse of format_double; throws ParseError naming the field.
double parse_double(std::string_view text, std::string_view field);

std::vector<std::string> split_fields(std::string_view line, char sep = ',');

/// Reads a CSV file into rows of fields, checking the header exactly.
/// Throws IoError if unreadable and ParseError (with line) on a bad shape.
std::vector<std::vector<std::string>> read_csv(const std::string& path,
                                               const std::vector<std::string>& header);

}  // namespace lldx
