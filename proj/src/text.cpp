#include "hatesense/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "hatesense/rng.hpp"
#include "json.hpp"

namespace hatesense {

namespace {

bool is_punct(unsigned char c) { return std::ispunct(c) != 0; }

std::string lowercase(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

const char* split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "dev") return Split::kDev;
  if (name == "test") return Split::kTest;
  throw std::invalid_argument("unknown split \"" + name +
                              "\" (expected train, dev, or test)");
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream stream(lowercase(text));
  std::string chunk;
  while (stream >> chunk) {
    std::size_t begin = 0, end = chunk.size();
    while (begin < end && is_punct(static_cast<unsigned char>(chunk[begin]))) ++begin;
    while (end > begin && is_punct(static_cast<unsigned char>(chunk[end - 1]))) --end;
    for (std::size_t i = 0; i < begin; ++i) tokens.push_back(std::string(1, chunk[i]));
    if (begin < end) tokens.push_back(chunk.substr(begin, end - begin));
    for (std::size_t i = end; i < chunk.size(); ++i)
      tokens.push_back(std::string(1, chunk[i]));
  }
  return tokens;
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  v.id_to_token_ = tokens;
  if (v.id_to_token_.size() < 2 || v.id_to_token_[kPad] != "<pad>" ||
      v.id_to_token_[kUnk] != "<unk>") {
    throw std::invalid_argument(
        "vocabulary token list must start with <pad>, <unk>");
  }
  for (std::size_t i = 0; i < v.id_to_token_.size(); ++i)
    v.token_to_id_[v.id_to_token_[i]] = i;
  return v;
}

Vocabulary Vocabulary::build(const GroupedCorpus& corpus, std::size_t max_size,
                             const std::vector<std::string>& ensure_texts) {
  if (max_size < 2) {
    throw std::invalid_argument("vocabulary max_size must be >= 2 to hold the "
                                "reserved ids");
  }
  std::map<std::string, std::size_t> counts;
  bool any_train = false;
  for (const Example& ex : corpus.examples()) {
    if (ex.split != Split::kTrain) continue;
    any_train = true;
    for (const std::string& token : tokenize(ex.text)) ++counts[token];
  }
  if (!any_train) {
    throw std::invalid_argument("build_vocabulary: corpus has no train split");
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(),
                                                          counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> tokens{"<pad>", "<unk>"};
  for (const auto& entry : ranked) {
    if (tokens.size() >= max_size) break;
    tokens.push_back(entry.first);
  }
  for (const std::string& text : ensure_texts) {
    for (const std::string& token : tokenize(text)) {
      if (std::find(tokens.begin(), tokens.end(), token) == tokens.end())
        tokens.push_back(token);
    }
  }
  return from_tokens(tokens);
}

std::size_t Vocabulary::id_of(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token_of(std::size_t id) const {
  if (id >= id_to_token_.size()) {
    throw std::out_of_range("token_of: id " + std::to_string(id) +
                            " out of range for vocabulary of size " +
                            std::to_string(id_to_token_.size()));
  }
  return id_to_token_[id];
}

std::vector<std::size_t> Vocabulary::encode(
    const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const std::string& token : tokens) ids.push_back(id_of(token));
  return ids;
}

TokenSequence make_sequence(const Vocabulary& vocab, const std::string& text,
                            std::size_t max_len) {
  std::vector<std::string> tokens = tokenize(text);
  if (tokens.size() > max_len) tokens.resize(max_len);
  TokenSequence seq;
  seq.ids = vocab.encode(tokens);
  seq.length = seq.ids.size();
  return seq;
}

// ---------------------------------------------------------------------------
// GroupedCorpus
// ---------------------------------------------------------------------------

GroupedCorpus GroupedCorpus::from_examples(std::vector<Example> examples,
                                           std::vector<std::string> class_names) {
  if (class_names.size() < 2) {
    throw std::invalid_argument("corpus needs at least 2 class names");
  }
  GroupedCorpus corpus;
  corpus.examples_ = std::move(examples);
  corpus.class_names_ = std::move(class_names);
  for (std::size_t i = 0; i < corpus.examples_.size(); ++i) {
    const Example& ex = corpus.examples_[i];
    corpus.label_index(ex.label);  // validates
    for (const std::string& group : ex.groups) {
      if (group.empty()) {
        throw std::invalid_argument("example " + std::to_string(i) +
                                    " has an empty group name");
      }
      corpus.group_index_[group].push_back(i);
    }
  }
  return corpus;
}

std::size_t GroupedCorpus::label_index(const std::string& label) const {
  for (std::size_t i = 0; i < class_names_.size(); ++i)
    if (class_names_[i] == label) return i;
  throw std::invalid_argument("label \"" + label +
                              "\" is not in the configured class set");
}

std::vector<std::size_t> GroupedCorpus::split_indices(Split split) const {
  std::vector<std::size_t> indices;
  for (std::size_t i = 0; i < examples_.size(); ++i)
    if (examples_[i].split == split) indices.push_back(i);
  return indices;
}

std::size_t GroupedCorpus::split_size(Split split) const {
  std::size_t count = 0;
  for (const Example& ex : examples_)
    if (ex.split == split) ++count;
  return count;
}

std::size_t GroupedCorpus::group_count(const std::string& group,
                                       Split split) const {
  auto it = group_index_.find(group);
  if (it == group_index_.end()) return 0;
  std::size_t count = 0;
  for (std::size_t idx : it->second)
    if (examples_[idx].split == split) ++count;
  return count;
}

std::vector<std::string> GroupedCorpus::group_names() const {
  std::vector<std::string> names;
  names.reserve(group_index_.size());
  for (const auto& [name, indices] : group_index_) names.push_back(name);
  return names;
}

// ---------------------------------------------------------------------------
// Corpus file format
// ---------------------------------------------------------------------------

GroupedCorpus load_corpus(const std::string& path,
                          const std::vector<std::string>& class_names) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open corpus file: " + path);
  }
  std::vector<Example> examples;
  // Same text in two different splits is leakage; reject it.
  std::unordered_map<std::string, Split> seen_split;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& err) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed record: " + err.what());
    }
    if (!record.is_object() || !record.contains("text") ||
        !record.contains("label") || !record.contains("groups") ||
        !record.contains("split")) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": record must have text/label/groups/split");
    }
    Example ex;
    try {
      ex.text = record.at("text").get<std::string>();
      ex.label = record.at("label").get<std::string>();
      ex.groups = record.at("groups").get<std::vector<std::string>>();
      ex.split = parse_split(record.at("split").get<std::string>());
    } catch (const std::exception& err) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": " + err.what());
    }
    if (std::find(class_names.begin(), class_names.end(), ex.label) ==
        class_names.end()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": unknown label \"" + ex.label + "\"");
    }
    for (const std::string& group : ex.groups) {
      if (group.empty()) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": empty group name");
      }
    }
    auto it = seen_split.find(ex.text);
    if (it != seen_split.end() && it->second != ex.split) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": text already assigned to split \"" +
                               split_name(it->second) + "\"");
    }
    seen_split.emplace(ex.text, ex.split);
    examples.push_back(std::move(ex));
  }
  return GroupedCorpus::from_examples(std::move(examples), class_names);
}

void save_corpus(const GroupedCorpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write corpus file: " + path);
  }
  for (const Example& ex : corpus.examples()) {
    nlohmann::json record;
    record["text"] = ex.text;
    record["label"] = ex.label;
    record["groups"] = ex.groups;
    record["split"] = split_name(ex.split);
    out << record.dump() << "\n";
  }
}

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> make_lexicon(const std::string& prefix, std::size_t n) {
  std::vector<std::string> words;
  words.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    words.push_back(prefix + std::to_string(i));
  return words;
}

const std::string& pick_word(const std::vector<std::string>& pool, Rng& rng) {
  return pool[rng.uniform_index(pool.size())];
}

}  // namespace

GroupSynthSpec group_spec_from_totals(const std::string& name,
                                      std::size_t hate_total,
                                      std::size_t benign_total) {
  GroupSynthSpec g;
  g.name = name;
  auto split_counts = [](std::size_t total, std::size_t& train, std::size_t& dev,
                         std::size_t& test) {
    if (total == 0) {
      train = dev = test = 0;
      return;
    }
    dev = std::max<std::size_t>(1, (total * 15 + 50) / 100);
    test = std::max<std::size_t>(1, (total * 15 + 50) / 100);
    train = total > dev + test ? total - dev - test : 0;
  };
  split_counts(hate_total, g.train_hate, g.dev_hate, g.test_hate);
  split_counts(benign_total, g.train_benign, g.dev_benign, g.test_benign);
  return g;
}

GroupedCorpus synth_corpus(const SynthSpec& spec) {
  if (spec.groups.size() < 2) {
    throw std::invalid_argument("synth_corpus: need at least 2 groups");
  }
  if (spec.class_names.size() < 2 ||
      spec.class_names.size() != spec.hateful_mask.size()) {
    throw std::invalid_argument(
        "synth_corpus: need at least 2 classes with a matching hateful mask");
  }
  std::vector<std::size_t> hateful_classes, benign_classes;
  for (std::size_t i = 0; i < spec.hateful_mask.size(); ++i) {
    (spec.hateful_mask[i] ? hateful_classes : benign_classes).push_back(i);
  }
  if (hateful_classes.empty() || benign_classes.empty()) {
    throw std::invalid_argument(
        "synth_corpus: class set needs at least one hateful and one "
        "non-hateful class");
  }
  for (Split split : {Split::kTrain, Split::kDev, Split::kTest}) {
    std::size_t total = 0;
    for (const GroupSynthSpec& g : spec.groups) {
      switch (split) {
        case Split::kTrain: total += g.train_hate + g.train_benign; break;
        case Split::kDev: total += g.dev_hate + g.dev_benign; break;
        case Split::kTest: total += g.test_hate + g.test_benign; break;
      }
    }
    if (total == 0) {
      throw std::invalid_argument(std::string("synth_corpus: split \"") +
                                  split_name(split) +
                                  "\" would be empty with these counts");
    }
  }

  const std::vector<std::string> shared_filler =
      make_lexicon("talk", spec.shared_filler_lexicon);
  const std::vector<std::string> ambiguous =
      make_lexicon("edge", spec.ambiguous_lexicon);
  const std::vector<std::string> contested =
      make_lexicon("dual", std::max<std::size_t>(1, spec.contested_lexicon));

  Rng rng(spec.seed);
  std::vector<Example> examples;
  std::unordered_map<std::string, Split> text_split;
  for (std::size_t gi = 0; gi < spec.groups.size(); ++gi) {
    const GroupSynthSpec& g = spec.groups[gi];
    if (g.name.empty()) {
      throw std::invalid_argument("synth_corpus: group names must be nonempty");
    }
    // Slur analogs are partitioned per hateful class so multi-class sets
    // keep distinct hateful senses.
    std::vector<std::vector<std::string>> slurs;
    for (std::size_t c = 0; c < hateful_classes.size(); ++c) {
      slurs.push_back(make_lexicon(
          g.name + "slur" + (hateful_classes.size() > 1 ? std::to_string(c) : "") + "x",
          std::max<std::size_t>(1, g.slur_lexicon)));
    }
    const std::vector<std::string> benign_words =
        make_lexicon(g.name + "word", std::max<std::size_t>(1, g.benign_lexicon));
    const std::vector<std::string> filler =
        g.disjoint_filler
            ? make_lexicon(g.name + "say", std::max<std::size_t>(1, g.private_filler_lexicon))
            : shared_filler;

    auto emit = [&](Split split, std::size_t count, bool hateful) {
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t class_id =
            hateful ? hateful_classes[i % hateful_classes.size()]
                    : benign_classes[i % benign_classes.size()];
        // Regenerate on a cross-split text collision; duplicated text in
        // two splits would be leakage and load_corpus rejects it.
        std::string text;
        for (int attempt = 0; attempt < 1000; ++attempt) {
          std::vector<std::string> words;
          words.push_back(g.name);
          if (hateful) {
            const auto& pool =
                g.contested_slurs ? contested : slurs[i % hateful_classes.size()];
            // Cycle the primary marker so every slur analog is covered as
            // evenly as the counts allow.
            words.push_back(pool[(i / hateful_classes.size()) % pool.size()]);
            if (rng.uniform() < 0.4) words.push_back(pick_word(pool, rng));
            if (rng.uniform() < spec.ambiguous_hate_rate)
              words.push_back(pick_word(ambiguous, rng));
          } else {
            words.push_back(pick_word(benign_words, rng));
            if (rng.uniform() < 0.4) words.push_back(pick_word(benign_words, rng));
            if (rng.uniform() < spec.ambiguous_benign_rate)
              words.push_back(pick_word(ambiguous, rng));
            if (!g.contested_slurs &&
                rng.uniform() < spec.contested_benign_rate)
              words.push_back(pick_word(contested, rng));
          }
          const std::size_t n_filler = 3 + rng.uniform_index(3);
          for (std::size_t f = 0; f < n_filler; ++f)
            words.push_back(pick_word(filler, rng));
          rng.shuffle(words);
          text.clear();
          for (std::size_t w = 0; w < words.size(); ++w) {
            if (w) text += " ";
            text += words[w];
          }
          auto it = text_split.find(text);
          if (it == text_split.end() || it->second == split) break;
          text.clear();
        }
        if (text.empty()) {
          throw std::runtime_error(
              "synth_corpus: could not generate a split-unique sentence; "
              "lexicons too small for the requested counts");
        }
        text_split.emplace(text, split);
        Example ex;
        ex.text = std::move(text);
        ex.label = spec.class_names[class_id];
        ex.groups = {g.name};
        ex.split = split;
        examples.push_back(std::move(ex));
      }
    };
    emit(Split::kTrain, g.train_hate, true);
    emit(Split::kTrain, g.train_benign, false);
    emit(Split::kDev, g.dev_hate, true);
    emit(Split::kDev, g.dev_benign, false);
    emit(Split::kTest, g.test_hate, true);
    emit(Split::kTest, g.test_benign, false);
  }
  return GroupedCorpus::from_examples(std::move(examples), spec.class_names);
}

}  // namespace hatesense
