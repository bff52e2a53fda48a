#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "hatesense/text.hpp"

using namespace hatesense;

namespace {

std::string temp_path(const std::string& name) {
  return "test_tmp_" + name;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

SynthSpec small_synth_spec() {
  SynthSpec spec;
  for (const char* name : {"g1", "g2"}) {
    GroupSynthSpec g;
    g.name = name;
    g.train_hate = g.train_benign = 10;
    g.dev_hate = g.dev_benign = 2;
    g.test_hate = g.test_benign = 3;
    spec.groups.push_back(g);
  }
  return spec;
}

}  // namespace

TEST_CASE("tokenize casefolds and splits on whitespace") {
  CHECK(tokenize("Hello WORLD") == std::vector<std::string>{"hello", "world"});
}

TEST_CASE("tokenize strips edge punctuation into separate tokens") {
  CHECK(tokenize("go home!") == std::vector<std::string>{"go", "home", "!"});
  CHECK(tokenize("(hi)...") ==
        std::vector<std::string>{"(", "hi", ")", ".", ".", "."});
  CHECK(tokenize("don't stop") == std::vector<std::string>{"don't", "stop"});
  CHECK(tokenize("!?") == std::vector<std::string>{"!", "?"});
}

TEST_CASE("tokenize of empty text is empty") {
  CHECK(tokenize("").empty());
  CHECK(tokenize("   \t\n").empty());
}

TEST_CASE("tokenize is idempotent on its own space-joined output") {
  for (const char* text :
       {"Hello, World!", "a.b.c", "it's 10:30... (really)", "x !!y?? z"}) {
    const std::vector<std::string> once = tokenize(text);
    std::string joined;
    for (std::size_t i = 0; i < once.size(); ++i) {
      if (i) joined += " ";
      joined += once[i];
    }
    CHECK(tokenize(joined) == once);
  }
}

TEST_CASE("vocabulary ranks by frequency then lexicographic and truncates") {
  std::vector<Example> examples;
  Example ex;
  ex.label = "nothate";
  ex.groups = {"g1"};
  ex.split = Split::kTrain;
  ex.text = "b a b a c a b";  // a:3 b:3 c:1
  examples.push_back(ex);
  GroupedCorpus corpus =
      GroupedCorpus::from_examples(examples, {"hate", "nothate"});

  Vocabulary vocab = Vocabulary::build(corpus, 4);
  CHECK(vocab.size() == 4);
  CHECK(vocab.id_of("a") == 2);
  CHECK(vocab.id_of("b") == 3);
  CHECK(vocab.id_of("c") == Vocabulary::kUnk);  // dropped
  CHECK(vocab.token_of(2) == "a");
  CHECK(vocab.id_of(vocab.token_of(3)) == 3);

  Vocabulary full = Vocabulary::build(corpus, 100);
  CHECK(full.size() == 5);  // pad, unk, a, b, c
  CHECK(full.id_of("c") == 4);
}

TEST_CASE("vocabulary frequency ranking matches a brute-force count") {
  SynthSpec spec = small_synth_spec();
  GroupedCorpus corpus = synth_corpus(spec);
  Vocabulary vocab = Vocabulary::build(corpus, 10000);

  // Independent counting pass.
  std::map<std::string, std::size_t> counts;
  for (const Example& ex : corpus.examples()) {
    if (ex.split != Split::kTrain) continue;
    for (const std::string& token : tokenize(ex.text)) ++counts[token];
  }
  CHECK(vocab.size() == counts.size() + 2);
  for (std::size_t id = 3; id < vocab.size(); ++id) {
    const auto prev = counts.at(vocab.token_of(id - 1));
    const auto cur = counts.at(vocab.token_of(id));
    const bool ordered =
        prev > cur || (prev == cur && vocab.token_of(id - 1) < vocab.token_of(id));
    CHECK(ordered);
  }
}

TEST_CASE("vocabulary requires a train split") {
  std::vector<Example> examples;
  Example ex;
  ex.label = "hate";
  ex.groups = {"g"};
  ex.split = Split::kTest;
  ex.text = "x";
  examples.push_back(ex);
  GroupedCorpus corpus =
      GroupedCorpus::from_examples(examples, {"hate", "nothate"});
  CHECK_THROWS_AS(Vocabulary::build(corpus, 100), std::invalid_argument);
}

TEST_CASE("load_corpus parses a crafted fixture and builds the group index") {
  const std::string path = temp_path("fixture.jsonl");
  {
    std::ofstream out(path);
    out << R"({"text":"a b","label":"hate","groups":["g1"],"split":"train"})" << "\n";
    out << R"({"text":"c d","label":"nothate","groups":["g1","g2"],"split":"dev"})" << "\n";
    out << R"({"text":"e f","label":"hate","groups":["g2"],"split":"test"})" << "\n";
  }
  GroupedCorpus corpus = load_corpus(path, {"hate", "nothate"});
  CHECK(corpus.examples().size() == 3);
  CHECK(corpus.group_index().at("g1") == std::vector<std::size_t>{0, 1});
  CHECK(corpus.group_index().at("g2") == std::vector<std::size_t>{1, 2});
  CHECK(corpus.group_count("g1", Split::kTrain) == 1);
  CHECK(corpus.split_indices(Split::kTest) == std::vector<std::size_t>{2});
  std::remove(path.c_str());
}

TEST_CASE("load_corpus reports unknown labels with the line number") {
  const std::string path = temp_path("bad_label.jsonl");
  {
    std::ofstream out(path);
    out << R"({"text":"a","label":"hate","groups":[],"split":"train"})" << "\n";
    out << R"({"text":"b","label":"spam","groups":[],"split":"train"})" << "\n";
  }
  CHECK_THROWS_WITH_AS(load_corpus(path, {"hate", "nothate"}),
                       doctest::Contains(":2"), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("load_corpus reports malformed lines and cross-split duplicates") {
  const std::string path = temp_path("malformed.jsonl");
  {
    std::ofstream out(path);
    out << "not json\n";
  }
  CHECK_THROWS_WITH_AS(load_corpus(path, {"hate", "nothate"}),
                       doctest::Contains(":1"), std::runtime_error);
  {
    std::ofstream out(path);
    out << R"({"text":"same","label":"hate","groups":[],"split":"train"})" << "\n";
    out << R"({"text":"same","label":"hate","groups":[],"split":"test"})" << "\n";
  }
  CHECK_THROWS_WITH_AS(load_corpus(path, {"hate", "nothate"}),
                       doctest::Contains("split"), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("corpus round-trips through save and load") {
  SynthSpec spec = small_synth_spec();
  for (GroupSynthSpec& g : spec.groups) {
    g.train_hate = g.train_benign = 120;
    g.dev_hate = g.dev_benign = 5;
    g.test_hate = g.test_benign = 5;
  }
  GroupedCorpus corpus = synth_corpus(spec);
  CHECK(corpus.examples().size() == 2 * (240 + 10 + 10));

  const std::string path1 = temp_path("roundtrip1.jsonl");
  const std::string path2 = temp_path("roundtrip2.jsonl");
  save_corpus(corpus, path1);
  GroupedCorpus loaded = load_corpus(path1, corpus.class_names());
  save_corpus(loaded, path2);
  CHECK(read_file(path1) == read_file(path2));
  REQUIRE(loaded.examples().size() == corpus.examples().size());
  for (std::size_t i = 0; i < corpus.examples().size(); ++i) {
    CHECK(loaded.examples()[i].text == corpus.examples()[i].text);
    CHECK(loaded.examples()[i].label == corpus.examples()[i].label);
    CHECK(loaded.examples()[i].groups == corpus.examples()[i].groups);
    CHECK(loaded.examples()[i].split == corpus.examples()[i].split);
  }
  std::remove(path1.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("synthetic corpus honors totals-style specs") {
  SynthSpec spec;
  spec.groups.push_back(group_spec_from_totals("g1", 20, 20));
  spec.groups.push_back(group_spec_from_totals("g2", 20, 20));
  GroupedCorpus corpus = synth_corpus(spec);
  CHECK(corpus.examples().size() == 80);
  CHECK(corpus.group_index().at("g1").size() == 40);
  CHECK(corpus.group_index().at("g2").size() == 40);
}

TEST_CASE("synthetic corpus per-split counts match the spec exactly") {
  SynthSpec spec = small_synth_spec();
  spec.groups[1].train_hate = 4;  // skewed group
  GroupedCorpus corpus = synth_corpus(spec);
  CHECK(corpus.group_count("g1", Split::kTrain) == 20);
  CHECK(corpus.group_count("g2", Split::kTrain) == 14);
  CHECK(corpus.group_count("g1", Split::kTest) == 6);
  std::size_t g2_hate_train = 0;
  for (std::size_t idx : corpus.group_index().at("g2")) {
    const Example& ex = corpus.examples()[idx];
    if (ex.split == Split::kTrain && ex.label == "hate") ++g2_hate_train;
  }
  CHECK(g2_hate_train == 4);
}

TEST_CASE("synthetic corpus is deterministic under the seed") {
  SynthSpec spec = small_synth_spec();
  GroupedCorpus a = synth_corpus(spec);
  GroupedCorpus b = synth_corpus(spec);
  REQUIRE(a.examples().size() == b.examples().size());
  for (std::size_t i = 0; i < a.examples().size(); ++i)
    CHECK(a.examples()[i].text == b.examples()[i].text);

  spec.seed = 99;
  GroupedCorpus c = synth_corpus(spec);
  bool any_different = false;
  for (std::size_t i = 0; i < a.examples().size(); ++i)
    if (a.examples()[i].text != c.examples()[i].text) any_different = true;
  CHECK(any_different);
}

TEST_CASE("synthetic corpus rejects empty splits and degenerate specs") {
  SynthSpec spec = small_synth_spec();
  for (GroupSynthSpec& g : spec.groups) g.dev_hate = g.dev_benign = 0;
  CHECK_THROWS_WITH_AS(synth_corpus(spec), doctest::Contains("dev"),
                       std::invalid_argument);
  SynthSpec one_group;
  one_group.groups.push_back(group_spec_from_totals("g1", 20, 20));
  CHECK_THROWS_AS(synth_corpus(one_group), std::invalid_argument);
}

TEST_CASE("group index rebuilt from scratch matches the incremental one") {
  SynthSpec spec = small_synth_spec();
  GroupedCorpus corpus = synth_corpus(spec);
  std::map<std::string, std::vector<std::size_t>> rebuilt;
  for (std::size_t i = 0; i < corpus.examples().size(); ++i)
    for (const std::string& g : corpus.examples()[i].groups)
      rebuilt[g].push_back(i);
  CHECK(rebuilt == corpus.group_index());
}

TEST_CASE("make_sequence truncates to max_len and maps unknown tokens") {
  Vocabulary vocab = Vocabulary::from_tokens({"<pad>", "<unk>", "a", "b"});
  TokenSequence seq = make_sequence(vocab, "a b zzz a b a", 4);
  CHECK(seq.length == 4);
  CHECK(seq.ids == std::vector<std::size_t>{2, 3, Vocabulary::kUnk, 2});
}
