// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "lldx/stream/task_stream.hpp"

namespace lldx {

inline constexpr int kStreamFormatVersion = 1;

/// JSON Lines: a header object (format, version, vocabularies, label->task
/// map, record count) followed by one record per note:
///   {"id", "split", "text", "entities": [surface...], "label", "task"}
/// Train records of every task precede its test records; tasks in order.
std::string format_stream(const TaskStream& stream);
TaskStream parse_stream(const std::string& content);

void save_stream(const TaskStream& stream, const std::string& path);
TaskStream load_stream(const std::string& path);

}  // namespace lldx
