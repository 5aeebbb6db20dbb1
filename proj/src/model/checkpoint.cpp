// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#include "lldx/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lldx/error.hpp"

namespace lldx {

namespace {

using json = nlohmann::ordered_json;
constexpr char kMagic[8] = {'L', 'L', 'D', 'X', 'C', 'K', 'P', 'T'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const std::string& in, std::size_t& pos) {
  if (pos + 8 > in.size()) throw ParseError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  pos += 8;
  return v;
}

}  // namespace

std::string serialize_checkpoint(const DualEncoderModel& model) {
  const ModelConfig& c = model.config();
  json meta;
  meta["format"] = "lldx-checkpoint";
  meta["char_vocab"] = c.char_vocab;
  meta["entity_vocab"] = c.entity_vocab;
  meta["embed_dim"] = c.embed_dim;
  meta["hidden"] = c.hidden;
  meta["agg_mode"] = std::string(agg_mode_name(c.agg));
  meta["use_entities"] = c.use_entities;
  meta["use_attention"] = c.use_attention;
  meta["num_classes"] = model.num_classes();
  json tensors = json::array();
  for (const ParamSlot* s : model.parameters()) {
    tensors.push_back({{"name", s->name}, {"rows", s->rows()}, {"cols", s->cols()}});
  }
  meta["tensors"] = tensors;
  const std::string meta_text = meta.dump();

  std::string out(kMagic, sizeof(kMagic));
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((kCheckpointVersion >> (8 * i)) & 0xFF));
  put_u64(out, meta_text.size());
  out += meta_text;
  for (const ParamSlot* s : model.parameters()) {
    for (double v : s->value.flat()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

DualEncoderModel deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("not an lldx checkpoint");
  }
  std::uint32_t version = 0;
  for (int i = 0; i < 4; ++i) {
    version |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[8 + i])) << (8 * i);
  }
  if (version != kCheckpointVersion) throw ParseError("unsupported checkpoint version");
  std::size_t pos = 12;
  const std::uint64_t meta_len = get_u64(bytes, pos);
  if (pos + meta_len > bytes.size()) throw ParseError("checkpoint metadata truncated");
  json meta;
  try {
    meta = json::parse(bytes.substr(pos, meta_len));
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad checkpoint metadata: ") + e.what());
  }
  pos += meta_len;

  ModelConfig c;
  c.char_vocab = meta.at("char_vocab").get<std::size_t>();
  c.entity_vocab = meta.at("entity_vocab").get<std::size_t>();
  c.embed_dim = meta.at("embed_dim").get<std::size_t>();
  c.hidden = meta.at("hidden").get<std::size_t>();
  c.agg = parse_agg_mode(meta.at("agg_mode").get<std::string>());
  c.use_entities = meta.at("use_entities").get<bool>();
  c.use_attention = meta.at("use_attention").get<bool>();
  RngStream scratch(0);
  DualEncoderModel model(c, scratch);
  model.expand_classifier(meta.at("num_classes").get<std::size_t>(), scratch);

  const auto slots = model.parameters();
  const auto& tensors = meta.at("tensors");
  if (tensors.size() != slots.size()) throw ParseError("checkpoint tensor count mismatch");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& t = tensors[i];
    if (t.at("name").get<std::string>() != slots[i]->name ||
        t.at("rows").get<std::size_t>() != slots[i]->rows() ||
        t.at("cols").get<std::size_t>() != slots[i]->cols()) {
      throw ParseError("checkpoint tensor '" + t.at("name").get<std::string>() +
                           "' does not match the model layout",
                       0);
    }
    for (double& v : slots[i]->value.flat()) v = std::bit_cast<double>(get_u64(bytes, pos));
  }
  if (pos != bytes.size()) throw ParseError("trailing bytes after checkpoint tensors");
  return model;
}

void save_checkpoint(const DualEncoderModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out << serialize_checkpoint(model);
  if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

DualEncoderModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace lldx
