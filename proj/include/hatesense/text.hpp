#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace hatesense {

enum class Split { kTrain, kDev, kTest };

const char* split_name(Split split);
Split parse_split(const std::string& name);

// Lowercase, whitespace-split, leading/trailing punctuation emitted as
// separate tokens. Idempotent on its own space-joined output.
std::vector<std::string> tokenize(const std::string& text);

struct Example {
  std::string text;
  std::string label;
  std::vector<std::string> groups;
  Split split = Split::kTrain;
};

class GroupedCorpus;

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  // Ranked by (frequency desc, token asc) over the train split, truncated
  // to max_size ids including the two reserved ones. Tokens of
  // ensure_texts (e.g. the class names) are appended even when the train
  // split never uses them, so class-name encoding has real embeddings to
  // train instead of collapsing onto <unk>.
  static Vocabulary build(const GroupedCorpus& corpus, std::size_t max_size,
                          const std::vector<std::string>& ensure_texts = {});
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  std::size_t size() const { return id_to_token_.size(); }
  std::size_t id_of(const std::string& token) const;  // kUnk when absent
  const std::string& token_of(std::size_t id) const;
  std::vector<std::size_t> encode(const std::vector<std::string>& tokens) const;
  // Non-reserved tokens in id order, for serialization.
  const std::vector<std::string>& tokens() const { return id_to_token_; }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, std::size_t> token_to_id_;
};

struct TokenSequence {
  std::vector<std::size_t> ids;
  std::size_t length = 0;  // ids beyond length are kPad
};

TokenSequence make_sequence(const Vocabulary& vocab, const std::string& text,
                            std::size_t max_len);

// Immutable labeled corpus with an inverted group index.
class GroupedCorpus {
 public:
  static GroupedCorpus from_examples(std::vector<Example> examples,
                                     std::vector<std::string> class_names);

  const std::vector<Example>& examples() const { return examples_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const std::map<std::string, std::vector<std::size_t>>& group_index() const {
    return group_index_;
  }

  std::size_t label_index(const std::string& label) const;
  std::vector<std::size_t> split_indices(Split split) const;
  std::size_t split_size(Split split) const;
  // Number of examples in `split` annotated with `group`.
  std::size_t group_count(const std::string& group, Split split) const;
  std::vector<std::string> group_names() const;

 private:
  std::vector<Example> examples_;
  std::vector<std::string> class_names_;
  std::map<std::string, std::vector<std::size_t>> group_index_;
};

// One JSON object per line with keys text/label/groups/split.
GroupedCorpus load_corpus(const std::string& path,
                          const std::vector<std::string>& class_names);
void save_corpus(const GroupedCorpus& corpus, const std::string& path);

struct GroupSynthSpec {
  std::string name;
  std::size_t train_hate = 0;
  std::size_t train_benign = 0;
  std::size_t dev_hate = 0;
  std::size_t dev_benign = 0;
  std::size_t test_hate = 0;
  std::size_t test_benign = 0;
  // Slur-analog and benign lexicon sizes, per group.
  std::size_t slur_lexicon = 6;
  std::size_t benign_lexicon = 6;
  // When set, filler words come from a group-private pool instead of the
  // shared one, giving the group a low word overlap with the rest.
  bool disjoint_filler = false;
  std::size_t private_filler_lexicon = 12;
  // When set, this group's hateful sentences are marked by contested
  // tokens instead of private slur analogs. Contested tokens also show up
  // benignly in other groups' sentences, so only context tells the uses
  // apart.
  bool contested_slurs = false;
};

// Splits per-group hate/benign totals 70/15/15 (dev and test get at least
// one example when the total is nonzero).
GroupSynthSpec group_spec_from_totals(const std::string& name,
                                      std::size_t hate_total,
                                      std::size_t benign_total);

struct SynthSpec {
  std::vector<GroupSynthSpec> groups;
  std::vector<std::string> class_names{"hate", "nothate"};
  std::vector<bool> hateful_mask{true, false};
  std::size_t shared_filler_lexicon = 24;
  std::size_t ambiguous_lexicon = 6;
  // How often an ambiguous token lands in hateful/benign sentences; equal
  // rates make those tokens pure polysemy with no marginal class signal.
  double ambiguous_hate_rate = 0.5;
  double ambiguous_benign_rate = 0.3;
  // Pool backing contested_slurs groups; other groups' benign sentences
  // pick from it at this rate.
  std::size_t contested_lexicon = 6;
  double contested_benign_rate = 0.3;
  std::uint64_t seed = 1;
};

// Deterministic templated corpus: hateful examples for a group contain
// slur-analog tokens from that group's pool, per-group per-split counts
// match the spec exactly.
GroupedCorpus synth_corpus(const SynthSpec& spec);

}  // namespace hatesense
