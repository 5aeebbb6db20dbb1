// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "lldx/model/model.hpp"

namespace lldx {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary container: 8-byte magic "LLDXCKPT", u32 version, u64 length of a
/// JSON metadata block (model config, label count, tensor names and shapes),
/// the metadata, then every tensor's doubles as little-endian IEEE-754 bits
/// in metadata order. Round trips are bit-exact.
std::string serialize_checkpoint(const DualEncoderModel& model);
DualEncoderModel deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const DualEncoderModel& model, const std::string& path);
DualEncoderModel load_checkpoint(const std::string& path);

}  // namespace lldx
