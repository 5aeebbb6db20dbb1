// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#include "lldx/stream/stream_io.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lldx/error.hpp"

namespace lldx {

namespace {

using json = nlohmann::ordered_json;

json header_of(const TaskStream& s, std::size_t num_records) {
  json h;
  h["format"] = "lldx-stream";
  h["version"] = kStreamFormatVersion;
  json chars = json::array();
  for (char32_t cp : s.char_vocab.symbols()) chars.push_back(encode_utf8(cp));
  h["char_vocab"] = chars;
  json ents = json::array();
  for (const auto& e : s.lexicon.entries()) ents.push_back({{"surface", e.surface}, {"type", e.type}});
  h["entity_vocab"] = ents;
  h["labels"] = s.label_names;
  json label_task = json::object();
  json tasks = json::array();
  for (const Task& t : s.tasks) {
    json labels = json::array();
    for (Label l = t.label_begin; l < t.label_end; ++l) {
      labels.push_back(s.label_names[l]);
      label_task[s.label_names[l]] = t.id;
    }
    tasks.push_back({{"task", t.id}, {"labels", labels}});
  }
  h["label_task"] = label_task;
  h["tasks"] = tasks;
  h["num_records"] = num_records;
  return h;
}

}  // namespace

std::string format_stream(const TaskStream& stream) {
  stream.validate();
  std::size_t num_records = 0;
  for (const Task& t : stream.tasks) num_records += t.train.size() + t.test.size();

  std::string out = header_of(stream, num_records).dump() + "\n";
  for (const Task& t : stream.tasks) {
    for (const auto& [split, notes] :
         {std::pair<const char*, const std::vector<Note>*>{"train", &t.train}, {"test", &t.test}}) {
      for (const Note& n : *notes) {
        json r;
        r["id"] = n.source_id;
        r["split"] = split;
        r["text"] = n.text;
        json ents = json::array();
        for (TokenId e : n.entity_ids) ents.push_back(stream.lexicon.entry(e).surface);
        r["entities"] = ents;
        r["label"] = stream.label_names[n.label];
        r["task"] = t.id;
        out += r.dump() + "\n";
      }
    }
  }
  return out;
}

TaskStream parse_stream(const std::string& content) {
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;

  auto parse_line = [&](const std::string& text) {
    try {
      return json::parse(text);
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
  };

  if (!std::getline(in, line)) throw ParseError("missing stream header", 1);
  ++line_no;
  const json header = parse_line(line);

  TaskStream s;
  std::map<std::string, Label> label_index;
  std::size_t num_records = 0;
  try {
    if (header.value("format", "") != "lldx-stream") {
      throw ParseError("not an lldx stream file", line_no);
    }
    if (header.at("version").get<int>() != kStreamFormatVersion) {
      throw ParseError("unsupported stream format version", line_no);
    }
    s.char_vocab = CharVocab::from_symbols(header.at("char_vocab").get<std::vector<std::string>>());
    for (const auto& e : header.at("entity_vocab")) {
      s.lexicon.add(e.at("surface").get<std::string>(), e.value("type", "entity"));
    }
    num_records = header.at("num_records").get<std::size_t>();

    // Canonical label order: task by task, in the order each task lists them.
    const auto declared = header.at("labels").get<std::vector<std::string>>();
    std::map<std::string, std::size_t> owner;
    for (const auto& t : header.at("tasks")) {
      const auto task_id = t.at("task").get<std::size_t>();
      if (task_id != s.tasks.size()) throw ParseError("tasks must be listed in order", line_no);
      Task task;
      task.id = task_id;
      task.label_begin = static_cast<Label>(s.label_names.size());
      for (const auto& name : t.at("labels").get<std::vector<std::string>>()) {
        auto [it, fresh] = owner.emplace(name, task_id);
        if (!fresh) {
          throw ValidationError("label '" + name + "' appears in tasks " +
                                std::to_string(it->second) + " and " + std::to_string(task_id) +
                                "; task label sets must be pairwise disjoint");
        }
        label_index[name] = static_cast<Label>(s.label_names.size());
        s.label_names.push_back(name);
      }
      task.label_end = static_cast<Label>(s.label_names.size());
      s.tasks.push_back(std::move(task));
    }
    if (declared.size() != s.label_names.size()) {
      throw ValidationError("header 'labels' and 'tasks' disagree on the label count");
    }
    for (const auto& name : declared) {
      if (!label_index.count(name)) {
        throw ValidationError("label '" + name + "' is not assigned to any task");
      }
    }
    for (const auto& [name, task] : header.at("label_task").items()) {
      auto it = owner.find(name);
      if (it == owner.end() || it->second != task.get<std::size_t>()) {
        throw ValidationError("label_task entry for '" + name + "' disagrees with task lists");
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad header: ") + e.what(), line_no);
  }

  std::size_t records = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json r = parse_line(line);
    try {
      Note n;
      n.source_id = r.at("id").get<std::string>();
      n.text = r.at("text").get<std::string>();
      const auto label_name = r.at("label").get<std::string>();
      auto li = label_index.find(label_name);
      if (li == label_index.end()) throw ParseError("unknown label '" + label_name + "'", line_no);
      n.label = li->second;
      const auto task_id = r.at("task").get<std::size_t>();
      if (task_id >= s.tasks.size() || !s.tasks[task_id].owns(n.label)) {
        throw ParseError("label '" + label_name + "' does not belong to task " +
                             std::to_string(task_id),
                         line_no);
      }
      for (const auto& surface : r.at("entities").get<std::vector<std::string>>()) {
        const auto id = s.lexicon.find(surface);
        if (id < 0) throw ParseError("entity '" + surface + "' not in entity_vocab", line_no);
        n.entity_ids.push_back(static_cast<TokenId>(id));
      }
      if (n.text.empty()) throw ParseError("empty note text", line_no);
      n.char_ids = tokenize_chars(n.text, s.char_vocab);
      const auto split = r.at("split").get<std::string>();
      if (split == "train") {
        s.tasks[task_id].train.push_back(std::move(n));
      } else if (split == "test") {
        s.tasks[task_id].test.push_back(std::move(n));
      } else {
        throw ParseError("split must be 'train' or 'test'", line_no);
      }
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad record: ") + e.what(), line_no);
    }
    ++records;
  }
  if (records != num_records) {
    throw ParseError("expected " + std::to_string(num_records) + " records, found " +
                         std::to_string(records) + " (truncated file?)",
                     line_no + 1);
  }
  s.validate();
  return s;
}

void save_stream(const TaskStream& stream, const std::string& path) {
  const std::string text = format_stream(stream);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write stream file '" + path + "'");
  out << text;
  if (!out) throw IoError("failed writing stream file '" + path + "'");
}

TaskStream load_stream(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open stream file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_stream(ss.str());
}

}  // namespace lldx
