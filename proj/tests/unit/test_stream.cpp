// Copyright 2026 The lldx Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <set>
#include <sstream>

#include "lldx/error.hpp"
#include "lldx/stream/stream_io.hpp"
#include "lldx/stream/synth.hpp"
#include "lldx/stream/text.hpp"

using namespace lldx;

namespace {

CharVocab vocab_of(std::vector<std::string> symbols) { return CharVocab::from_symbols(symbols); }

EntityLexicon lexicon_of(std::initializer_list<const char*> surfaces) {
  EntityLexicon lex;
  for (const char* s : surfaces) lex.add(s, "symptom");
  return lex;
}

LabeledCorpus toy_corpus(std::size_t classes, std::size_t per_class) {
  LabeledCorpus c;
  for (std::size_t k = 0; k < classes; ++k) {
    c.label_names.push_back("class" + std::to_string(k));
    for (std::size_t n = 0; n < per_class; ++n) {
      Note note;
      note.source_id = std::to_string(k) + "-" + std::to_string(n);
      note.text = "note " + std::to_string(k * 100 + n);
      note.label = static_cast<Label>(k);
      c.notes.push_back(note);
    }
  }
  return c;
}

SynthSpec small_spec() { return default_synth_spec(8, 20, 2); }

}  // namespace

TEST_CASE("tokenize_chars examples") {
  CharVocab abc = vocab_of({"a", "b", "c"});
  CHECK(tokenize_chars("abc", abc) == std::vector<TokenId>{1, 2, 3});
  CharVocab ab = vocab_of({"a", "b"});
  CHECK(tokenize_chars("abz", ab) == std::vector<TokenId>{1, 2, 0});
  CHECK(tokenize_chars("abc", abc) == tokenize_chars("abc", abc));
  CHECK_THROWS_AS(tokenize_chars("", abc), EmptyInputError);
}

TEST_CASE("tokenize_chars is per code point") {
  std::vector<std::string> train{"头痛 发热"};
  CharVocab v = CharVocab::build(train);
  CHECK(v.size() == 6);
  auto ids = tokenize_chars("发热头", v);
  REQUIRE(ids.size() == 3);
  CHECK(ids[0] != CharVocab::kUnk);
  CHECK(tokenize_chars("咳", v) == std::vector<TokenId>{CharVocab::kUnk});
}

TEST_CASE("extract_entities examples") {
  EntityLexicon lex = lexicon_of({"rash", "scalp"});
  CHECK(extract_entities("rash on scalp", lex) == std::vector<TokenId>{0, 1});
  EntityLexicon nested = lexicon_of({"vena", "inferior vena"});
  CHECK(extract_entities("thrombus of inferior vena cava", nested) == std::vector<TokenId>{1});
  CHECK(extract_entities("nothing here", lex).empty());
}

TEST_CASE("longest-match spans never overlap") {
  EntityLexicon lex = lexicon_of({"ab", "abc", "bcd", "c", "da"});
  auto matches = lex.scan("abcdabcda");
  for (std::size_t k = 1; k < matches.size(); ++k) CHECK(matches[k - 1].end <= matches[k].begin);
  REQUIRE(!matches.empty());
  CHECK(matches[0].id == 1);  // "abc" beats "ab"
}

TEST_CASE("lexicon parsing") {
  EntityLexicon lex = parse_lexicon("fever\tsymptom\nscalp\tbody\n");
  CHECK(lex.size() == 2);
  CHECK(lex.entry(1).type == "body");
  CHECK(parse_lexicon(format_lexicon(lex)) == lex);
  try {
    parse_lexicon("fever\tsymptom\nbroken line\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(lexicon_of({"x", "x"}), Error);
}

TEST_CASE("split_tasks examples") {
  RngStream rng(1);
  TaskStream s = split_tasks(toy_corpus(40, 10), SplitOptions{}, rng);
  CHECK(s.num_tasks() == 10);
  for (const Task& t : s.tasks) CHECK(t.num_labels() == 4);
  CHECK(s.accumulated_labels(3) == 12);
  s.validate();

  TaskStream one = split_tasks(toy_corpus(4, 10), SplitOptions{1, 0.8}, rng);
  CHECK(one.num_tasks() == 1);
  CHECK(one.tasks[0].num_labels() == 4);
  CHECK(one.tasks[0].train.size() == 32);
  CHECK(one.tasks[0].test.size() == 8);

  CHECK(split_tasks(toy_corpus(8, 5), SplitOptions{2, 0.8}, RngStream(9)) ==
        split_tasks(toy_corpus(8, 5), SplitOptions{2, 0.8}, RngStream(9)));
  CHECK_THROWS_AS(split_tasks(toy_corpus(10, 5), SplitOptions{3, 0.8}, rng), ConfigError);
}

TEST_CASE("split_tasks keeps labels disjoint and names consistent") {
  LabeledCorpus corpus = toy_corpus(12, 6);
  TaskStream s = split_tasks(corpus, SplitOptions{4, 0.5}, RngStream(3));
  std::set<std::string> names(s.label_names.begin(), s.label_names.end());
  CHECK(names.size() == 12);
  for (const Task& t : s.tasks) {
    for (const Note& n : t.train) {
      CHECK(t.owns(n.label));
      // The source note's class name follows the renumbered label.
      CHECK(s.label_names[n.label] == "class" + n.source_id.substr(0, n.source_id.find('-')));
      CHECK(!n.char_ids.empty());
    }
  }
}

TEST_CASE("synthesize_stream examples") {
  SynthSpec spec = default_synth_spec(8, 200, 2);
  TaskStream s = synthesize_stream(spec, RngStream(5));
  std::size_t total = 0;
  for (const Task& t : s.tasks) total += t.train.size() + t.test.size();
  CHECK(total == 1600);

  SynthSpec clean = small_spec();
  clean.noise_rate = 0.0;
  LabeledCorpus c = generate_corpus(clean, RngStream(6));
  for (const Note& n : c.notes) {
    bool has_keyword = false;
    for (const SynthKeyword& kw : clean.classes[n.label].keywords) {
      has_keyword = has_keyword || n.text.find(kw.surface) != std::string::npos;
    }
    CHECK(has_keyword);
  }

  CHECK(format_stream(synthesize_stream(small_spec(), RngStream(7))) ==
        format_stream(synthesize_stream(small_spec(), RngStream(7))));
  CHECK(format_stream(synthesize_stream(small_spec(), RngStream(7))) !=
        format_stream(synthesize_stream(small_spec(), RngStream(8))));
}

TEST_CASE("degenerate synth specs are rejected") {
  SynthSpec spec = small_spec();
  spec.classes[0].keywords.clear();
  CHECK_THROWS_AS(validate_synth_spec(spec), ConfigError);
  SynthSpec one = small_spec();
  one.classes.resize(1);
  one.num_tasks = 1;
  CHECK_THROWS_AS(validate_synth_spec(one), ConfigError);
  SynthSpec back = parse_synth_spec(synth_spec_to_json(small_spec()));
  CHECK(synth_spec_to_json(back) == synth_spec_to_json(small_spec()));
}

TEST_CASE("stream files round trip") {
  TaskStream s = synthesize_stream(small_spec(), RngStream(11));
  const std::string text = format_stream(s);
  CHECK(parse_stream(text) == s);

  auto path = std::filesystem::temp_directory_path() / "lldx_stream_roundtrip.jsonl";
  save_stream(s, path.string());
  CHECK(load_stream(path.string()) == s);
  std::filesystem::remove(path);
}

TEST_CASE("malformed stream files") {
  TaskStream s = synthesize_stream(small_spec(), RngStream(12));
  const std::string text = format_stream(s);

  SUBCASE("truncated") {
    const std::size_t cut = text.rfind('\n', text.size() - 2);
    CHECK_THROWS_AS(parse_stream(text.substr(0, cut + 1)), ParseError);
  }
  SUBCASE("broken json names the line") {
    std::string bad = text;
    const std::size_t second = bad.find('\n') + 1;
    bad.insert(second, "{oops\n");
    try {
      parse_stream(bad);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("overlapping label sets") {
    // Give the second task the first task's labels as well.
    std::string bad = text;
    const std::string key = "\"labels\":[";
    const std::size_t at = bad.find(key, bad.find("\"tasks\":["));
    REQUIRE(at != std::string::npos);
    const std::size_t close = bad.find(']', at);
    const std::string first = bad.substr(at + key.size(), close - at - key.size());
    const std::size_t second = bad.find(key, close);
    REQUIRE(second != std::string::npos);
    bad.insert(second + key.size(), first + ",");
    try {
      parse_stream(bad);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("disjoint") != std::string::npos);
    }
  }
}
