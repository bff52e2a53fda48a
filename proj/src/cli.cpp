#include "hatesense/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "hatesense/checkpoint.hpp"
#include "hatesense/experiments.hpp"
#include "hatesense/objectives.hpp"
#include "hatesense/train.hpp"

namespace hatesense::cli {

namespace {

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const std::string& item : split_csv(text))
    seeds.push_back(std::stoull(item));
  return seeds;
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> sizes;
  for (const std::string& item : split_csv(text))
    sizes.push_back(std::stoull(item));
  return sizes;
}

ClassSet make_class_set(const std::string& classes_csv,
                        const std::string& hateful_csv) {
  ClassSet set;
  set.names = split_csv(classes_csv);
  const std::vector<std::string> hateful = split_csv(hateful_csv);
  set.hateful.resize(set.names.size(), false);
  for (const std::string& name : hateful) {
    bool found = false;
    for (std::size_t i = 0; i < set.names.size(); ++i) {
      if (set.names[i] == name) {
        set.hateful[i] = true;
        found = true;
      }
    }
    if (!found) {
      throw CLI::ValidationError("--hateful", "class \"" + name +
                                                  "\" not in --classes");
    }
  }
  set.validate();
  return set;
}

// Shared flag bundles -------------------------------------------------------

struct ModelFlags {
  std::size_t d_model = 64, n_heads = 4, n_layers = 2, d_ff = 128, max_len = 64;
  std::size_t d_hidden = 0, max_vocab = 4096;
  double dropout = 0.0, temperature = 1.0;
  bool soft_augment = false;

  void attach(CLI::App* app) {
    app->add_option("--d-model", d_model, "encoder width");
    app->add_option("--n-heads", n_heads, "attention heads");
    app->add_option("--n-layers", n_layers, "encoder layers");
    app->add_option("--d-ff", d_ff, "feed-forward width");
    app->add_option("--max-len", max_len, "maximum tokens per input");
    app->add_option("--d-hidden", d_hidden, "classifier hidden width (0 = d-model)");
    app->add_option("--max-vocab", max_vocab, "vocabulary cap");
    app->add_option("--dropout", dropout, "dropout rate");
    app->add_option("--temperature", temperature, "sense softmax temperature");
    app->add_flag("--soft-augment", soft_augment,
                  "weight class vectors by the sense distribution");
  }

  ModelConfig to_config(std::uint64_t seed) const {
    ModelConfig cfg;
    cfg.encoder.d_model = d_model;
    cfg.encoder.n_heads = n_heads;
    cfg.encoder.n_layers = n_layers;
    cfg.encoder.d_ff = d_ff;
    cfg.encoder.max_len = max_len;
    cfg.encoder.dropout_rate = dropout;
    cfg.encoder.seed = seed;
    cfg.d_hidden = d_hidden;
    cfg.max_vocab = max_vocab;
    cfg.temperature = temperature;
    cfg.soft_augment = soft_augment;
    return cfg;
  }
};

struct TrainFlags {
  std::size_t epochs = 20, batch_size = 16, patience = 0;
  double lr = 3e-4;
  double lambda_cls = 1.0, lambda_consensus = 0.5, lambda_unique = 0.1;

  void attach(CLI::App* app) {
    app->add_option("--epochs", epochs, "training epochs");
    app->add_option("--batch-size", batch_size, "batch size");
    app->add_option("--lr", lr, "Adam learning rate");
    app->add_option("--patience", patience,
                    "early-stop patience on dev accuracy (0 = off)");
    app->add_option("--lambda-cls", lambda_cls, "classification loss weight");
    app->add_option("--lambda-consensus", lambda_consensus,
                    "consensus loss weight");
    app->add_option("--lambda-unique", lambda_unique,
                    "unique-sense loss weight");
  }

  TrainConfig to_config(std::uint64_t seed) const {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.learning_rate = lr;
    cfg.seed = seed;
    cfg.patience = patience;
    cfg.weights.cls = lambda_cls;
    cfg.weights.consensus = lambda_consensus;
    cfg.weights.unique = lambda_unique;
    return cfg;
  }
};

void write_train_log(const TrainResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write training log: " + path);
  }
  for (std::size_t i = 0; i < result.history.size(); ++i) {
    const EpochStats& stats = result.history[i];
    nlohmann::json line;
    line["epoch"] = i + 1;
    line["cls"] = stats.loss.cls;
    line["consensus"] = stats.loss.consensus;
    line["unique"] = stats.loss.unique;
    line["total"] = stats.loss.total;
    line["dev_accuracy"] = stats.dev_accuracy;
    out << line.dump() << "\n";
  }
  nlohmann::json last;
  last["best_epoch"] = result.best_epoch;
  last["best_dev_accuracy"] = result.best_dev_accuracy;
  out << last.dump() << "\n";
}

nlohmann::json predict_one(const Checkpoint& ckpt, const Vocabulary& vocab,
                           const std::string& text) {
  nlohmann::json object;
  object["text"] = text;
  TokenSequence seq = make_sequence(vocab, text, ckpt.config.encoder.max_len);
  if (seq.length == 0) {
    object["label"] = ckpt.classes.names[0];
    object["note"] = "empty input after tokenization";
    return object;
  }
  Tape tape;
  tape.set_recording(false);
  Prediction prediction = forward(tape, ckpt.params, ckpt.config, ckpt.classes,
                                  vocab, seq);
  object["label"] = ckpt.classes.names[prediction.predicted];

  // Per-class probabilities from the logits.
  Tensor probs = tape.softmax(prediction.logits, 1);
  nlohmann::json probabilities = nlohmann::json::object();
  for (std::size_t j = 0; j < ckpt.classes.size(); ++j)
    probabilities[ckpt.classes.names[j]] = probs.at(j);
  object["probabilities"] = std::move(probabilities);

  nlohmann::json tokens = nlohmann::json::array();
  if (prediction.has_senses) {
    const std::vector<std::string> words = tokenize(text);
    for (std::size_t i = 0; i < seq.length; ++i) {
      nlohmann::json token;
      token["token"] = words[i];
      token["sense"] = ckpt.classes.names[prediction.assignment.senses[i]];
      std::vector<double> dist;
      for (std::size_t j = 0; j < ckpt.classes.size(); ++j)
        dist.push_back(prediction.assignment.distributions.at(i, j));
      token["distribution"] = std::move(dist);
      tokens.push_back(std::move(token));
    }
  }
  object["tokens"] = std::move(tokens);
  return object;
}

void ensure_parent_dir(const std::string& path) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

// Subcommands ---------------------------------------------------------------

void setup_synth(CLI::App& app) {
  auto* cmd = app.add_subcommand("synth", "generate a synthetic corpus");
  auto groups = std::make_shared<std::size_t>(4);
  auto group_names = std::make_shared<std::string>();
  auto hate_per_group = std::make_shared<std::size_t>(50);
  auto benign_per_group = std::make_shared<std::size_t>(50);
  auto dev_per_group = std::make_shared<std::size_t>(8);
  auto test_per_group = std::make_shared<std::size_t>(15);
  auto skews = std::make_shared<std::vector<std::string>>();
  auto benign_skews = std::make_shared<std::vector<std::string>>();
  auto test_skews = std::make_shared<std::vector<std::string>>();
  auto disjoint = std::make_shared<std::vector<std::string>>();
  auto shared_lexicon = std::make_shared<std::size_t>(24);
  auto slur_lexicon = std::make_shared<std::size_t>(6);
  auto benign_lexicon = std::make_shared<std::size_t>(6);
  auto private_lexicon = std::make_shared<std::size_t>(12);
  auto ambiguous_lexicon = std::make_shared<std::size_t>(6);
  auto classes_csv = std::make_shared<std::string>("hate,nothate");
  auto hateful_csv = std::make_shared<std::string>("hate");
  auto seed = std::make_shared<std::uint64_t>(1);
  auto out_path = std::make_shared<std::string>();

  cmd->add_option("--groups", *groups, "number of groups (named g1..gN)");
  cmd->add_option("--group-names", *group_names,
                  "comma-separated group names (overrides --groups)");
  cmd->add_option("--hate-per-group", *hate_per_group,
                  "hateful train examples per group");
  cmd->add_option("--benign-per-group", *benign_per_group,
                  "benign train examples per group");
  cmd->add_option("--dev-per-group", *dev_per_group,
                  "dev examples per group per polarity");
  cmd->add_option("--test-per-group", *test_per_group,
                  "test examples per group per polarity");
  cmd->add_option("--skew", *skews,
                  "override a group's hateful train count, e.g. g4:10");
  cmd->add_option("--benign-skew", *benign_skews,
                  "override a group's benign train count, e.g. g4:10");
  cmd->add_option("--test-skew", *test_skews,
                  "override a group's per-polarity test count, e.g. g4:13");
  auto contested = std::make_shared<std::vector<std::string>>();
  auto contested_lexicon = std::make_shared<std::size_t>(6);
  auto contested_benign_rate = std::make_shared<double>(0.3);
  cmd->add_option("--disjoint", *disjoint,
                  "groups whose filler lexicon is private");
  cmd->add_option("--contested", *contested,
                  "groups whose hate markers are contested tokens (benign "
                  "elsewhere)");
  cmd->add_option("--contested-lexicon", *contested_lexicon,
                  "contested token pool size");
  cmd->add_option("--contested-benign-rate", *contested_benign_rate,
                  "chance of a contested token in other groups' benign "
                  "sentences");
  cmd->add_option("--shared-lexicon", *shared_lexicon, "shared filler tokens");
  cmd->add_option("--slur-lexicon", *slur_lexicon, "slur-analog tokens per group");
  cmd->add_option("--benign-lexicon", *benign_lexicon, "benign tokens per group");
  cmd->add_option("--private-lexicon", *private_lexicon,
                  "private filler tokens for --disjoint groups");
  auto amb_hate_rate = std::make_shared<double>(0.5);
  auto amb_benign_rate = std::make_shared<double>(0.3);
  cmd->add_option("--ambiguous-lexicon", *ambiguous_lexicon,
                  "tokens appearing in both classes");
  cmd->add_option("--amb-hate-rate", *amb_hate_rate,
                  "chance of an ambiguous token in hateful sentences");
  cmd->add_option("--amb-benign-rate", *amb_benign_rate,
                  "chance of an ambiguous token in benign sentences");
  cmd->add_option("--classes", *classes_csv, "comma-separated class names");
  cmd->add_option("--hateful", *hateful_csv, "classes that count as hateful");
  cmd->add_option("--seed", *seed, "generator seed");
  cmd->add_option("--out", *out_path, "output corpus path")->required();

  cmd->callback([=]() {
    ClassSet classes = make_class_set(*classes_csv, *hateful_csv);
    SynthSpec spec;
    spec.class_names = classes.names;
    spec.hateful_mask = classes.hateful;
    spec.shared_filler_lexicon = *shared_lexicon;
    spec.ambiguous_lexicon = *ambiguous_lexicon;
    spec.ambiguous_hate_rate = *amb_hate_rate;
    spec.ambiguous_benign_rate = *amb_benign_rate;
    spec.seed = *seed;

    std::vector<std::string> names = split_csv(*group_names);
    if (names.empty()) {
      for (std::size_t i = 1; i <= *groups; ++i)
        names.push_back("g" + std::to_string(i));
    }
    for (const std::string& name : names) {
      GroupSynthSpec g;
      g.name = name;
      g.train_hate = *hate_per_group;
      g.train_benign = *benign_per_group;
      g.dev_hate = g.dev_benign = *dev_per_group;
      g.test_hate = g.test_benign = *test_per_group;
      g.slur_lexicon = *slur_lexicon;
      g.benign_lexicon = *benign_lexicon;
      g.private_filler_lexicon = *private_lexicon;
      spec.groups.push_back(std::move(g));
    }
    enum class Override { kTrainHate, kTrainBenign, kTest };
    auto apply_override = [&](const std::string& entry, Override kind,
                              const char* flag) {
      const std::size_t colon = entry.find(':');
      if (colon == std::string::npos) {
        throw CLI::ValidationError(flag,
                                   "expected name:count, got \"" + entry + "\"");
      }
      const std::string name = entry.substr(0, colon);
      const std::size_t count = std::stoull(entry.substr(colon + 1));
      for (GroupSynthSpec& g : spec.groups) {
        if (g.name != name) continue;
        switch (kind) {
          case Override::kTrainHate: g.train_hate = count; break;
          case Override::kTrainBenign: g.train_benign = count; break;
          case Override::kTest: g.test_hate = g.test_benign = count; break;
        }
        return;
      }
      throw CLI::ValidationError(flag, "unknown group \"" + name + "\"");
    };
    for (const std::string& entry : *skews)
      apply_override(entry, Override::kTrainHate, "--skew");
    for (const std::string& entry : *benign_skews)
      apply_override(entry, Override::kTrainBenign, "--benign-skew");
    for (const std::string& entry : *test_skews)
      apply_override(entry, Override::kTest, "--test-skew");
    spec.contested_lexicon = *contested_lexicon;
    spec.contested_benign_rate = *contested_benign_rate;
    for (GroupSynthSpec& g : spec.groups) {
      g.disjoint_filler = std::find(disjoint->begin(), disjoint->end(),
                                    g.name) != disjoint->end();
      g.contested_slurs = std::find(contested->begin(), contested->end(),
                                    g.name) != contested->end();
    }

    GroupedCorpus corpus = synth_corpus(spec);
    ensure_parent_dir(*out_path);
    save_corpus(corpus, *out_path);
    std::cout << "wrote " << corpus.examples().size() << " examples to "
              << *out_path << "\n";
    for (const std::string& name : corpus.group_names()) {
      std::cout << "  " << name << ": train "
                << corpus.group_count(name, Split::kTrain) << ", dev "
                << corpus.group_count(name, Split::kDev) << ", test "
                << corpus.group_count(name, Split::kTest) << "\n";
    }
  });
}

void setup_train(CLI::App& app) {
  auto* cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  auto corpus_path = std::make_shared<std::string>();
  auto classes_csv = std::make_shared<std::string>("hate,nothate");
  auto hateful_csv = std::make_shared<std::string>("hate");
  auto mode = std::make_shared<std::string>("sense");
  auto out_dir = std::make_shared<std::string>();
  auto seed = std::make_shared<std::uint64_t>(1);
  auto model_flags = std::make_shared<ModelFlags>();
  auto train_flags = std::make_shared<TrainFlags>();

  cmd->add_option("--corpus", *corpus_path, "corpus file")->required();
  cmd->add_option("--classes", *classes_csv, "comma-separated class names");
  cmd->add_option("--hateful", *hateful_csv, "classes that count as hateful");
  cmd->add_option("--mode", *mode, "sense or baseline");
  cmd->add_option("--out", *out_dir, "output directory")->required();
  cmd->add_option("--seed", *seed, "training and init seed");
  model_flags->attach(cmd);
  train_flags->attach(cmd);

  cmd->callback([=]() {
    ClassSet classes = make_class_set(*classes_csv, *hateful_csv);
    GroupedCorpus corpus = load_corpus(*corpus_path, classes.names);
    ModelConfig model = model_flags->to_config(*seed);
    TrainConfig train_config = train_flags->to_config(*seed);
    apply_mode(*mode, model, train_config);

    Vocabulary vocab = Vocabulary::build(corpus, model.max_vocab, classes.names);
    TrainResult result = train(corpus, classes, vocab, model, train_config);

    std::filesystem::create_directories(*out_dir);
    Checkpoint ckpt;
    ckpt.config = result.config;
    ckpt.classes = classes;
    ckpt.vocab_tokens = vocab.tokens();
    ckpt.params = result.params;
    save_checkpoint(ckpt, *out_dir + "/checkpoint.bin");
    write_train_log(result, *out_dir + "/train_log.jsonl");
    std::cout << "best dev accuracy " << result.best_dev_accuracy
              << " at epoch " << result.best_epoch << "; checkpoint in "
              << *out_dir << "\n";
  });
}

void setup_evaluate(CLI::App& app) {
  auto* cmd = app.add_subcommand("evaluate", "accuracy of a checkpoint on a split");
  auto corpus_path = std::make_shared<std::string>();
  auto checkpoint_path = std::make_shared<std::string>();
  auto split_str = std::make_shared<std::string>("test");
  auto out_path = std::make_shared<std::string>();

  cmd->add_option("--corpus", *corpus_path, "corpus file")->required();
  cmd->add_option("--checkpoint", *checkpoint_path, "checkpoint file")->required();
  cmd->add_option("--split", *split_str, "train, dev, or test");
  cmd->add_option("--out", *out_path, "optional metrics file");

  cmd->callback([=]() {
    Checkpoint ckpt = load_checkpoint(*checkpoint_path);
    GroupedCorpus corpus = load_corpus(*corpus_path, ckpt.classes.names);
    Vocabulary vocab = ckpt.vocabulary();
    const Split split = parse_split(*split_str);
    const double acc = accuracy(ckpt.params, ckpt.config, ckpt.classes, vocab,
                                corpus, split);
    nlohmann::json j;
    j["split"] = *split_str;
    j["count"] = corpus.split_size(split);
    j["accuracy"] = acc;
    const std::string line = j.dump();
    std::cout << line << "\n";
    if (!out_path->empty()) {
      ensure_parent_dir(*out_path);
      std::ofstream out(*out_path);
      if (!out) throw std::runtime_error("cannot write " + *out_path);
      out << line << "\n";
    }
  });
}

void setup_audit(CLI::App& app) {
  auto* cmd = app.add_subcommand("audit", "per-group bias report for a checkpoint");
  auto corpus_path = std::make_shared<std::string>();
  auto checkpoint_path = std::make_shared<std::string>();
  auto out_path = std::make_shared<std::string>();
  auto table_path = std::make_shared<std::string>();
  auto chart_path = std::make_shared<std::string>();
  auto min_test_count = std::make_shared<std::size_t>(25);
  auto overlap_k = std::make_shared<std::size_t>(100);

  cmd->add_option("--corpus", *corpus_path, "corpus file")->required();
  cmd->add_option("--checkpoint", *checkpoint_path, "checkpoint file")->required();
  cmd->add_option("--out", *out_path, "report file")->required();
  cmd->add_option("--table", *table_path, "optional human-readable table");
  cmd->add_option("--chart", *chart_path, "optional SVG bar chart");
  cmd->add_option("--min-test-count", *min_test_count,
                  "minimum test examples for a group to be reported");
  cmd->add_option("--overlap-k", *overlap_k, "top-K for the word overlap");

  cmd->callback([=]() {
    Checkpoint ckpt = load_checkpoint(*checkpoint_path);
    GroupedCorpus corpus = load_corpus(*corpus_path, ckpt.classes.names);
    Vocabulary vocab = ckpt.vocabulary();
    const std::vector<std::size_t> predictions = predict_split(
        ckpt.params, ckpt.config, ckpt.classes, vocab, corpus, Split::kTest);
    AuditConfig config;
    config.min_test_count = *min_test_count;
    config.overlap_k = *overlap_k;
    BiasReport report = build_report(predictions, corpus, config);
    ensure_parent_dir(*out_path);
    save_report(report, *out_path);
    if (!table_path->empty()) {
      ensure_parent_dir(*table_path);
      std::ofstream out(*table_path);
      if (!out) throw std::runtime_error("cannot write " + *table_path);
      out << render_report(report);
    }
    if (!chart_path->empty()) {
      ensure_parent_dir(*chart_path);
      write_bar_chart_svg(report, *chart_path);
    }
    std::cout << render_report(report);
  });
}

void setup_compare(CLI::App& app) {
  auto* cmd = app.add_subcommand("compare", "delta between two bias reports");
  auto baseline_path = std::make_shared<std::string>();
  auto method_path = std::make_shared<std::string>();
  auto out_path = std::make_shared<std::string>();

  cmd->add_option("--baseline", *baseline_path, "baseline report")->required();
  cmd->add_option("--method", *method_path, "method report")->required();
  cmd->add_option("--out", *out_path, "comparison file")->required();

  cmd->callback([=]() {
    BiasReport baseline = load_report(*baseline_path);
    BiasReport method = load_report(*method_path);
    ReportComparison cmp = compare_reports(baseline, method);
    ensure_parent_dir(*out_path);
    save_comparison(cmp, *out_path);
    std::cout << render_comparison(cmp);
  });
}

void setup_predict(CLI::App& app) {
  auto* cmd = app.add_subcommand("predict", "label texts with per-token senses");
  auto checkpoint_path = std::make_shared<std::string>();
  auto texts = std::make_shared<std::vector<std::string>>();
  auto input_path = std::make_shared<std::string>();
  auto out_path = std::make_shared<std::string>();

  cmd->add_option("--checkpoint", *checkpoint_path, "checkpoint file")->required();
  cmd->add_option("--text", *texts, "text to classify (repeatable)");
  cmd->add_option("--input", *input_path, "file with one text per line");
  cmd->add_option("--out", *out_path, "optional output file (default stdout)");

  cmd->callback([=]() {
    Checkpoint ckpt = load_checkpoint(*checkpoint_path);
    Vocabulary vocab = ckpt.vocabulary();
    std::vector<std::string> inputs = *texts;
    if (!input_path->empty()) {
      std::ifstream in(*input_path);
      if (!in) throw std::runtime_error("cannot open " + *input_path);
      std::string line;
      while (std::getline(in, line))
        if (!line.empty()) inputs.push_back(line);
    }
    if (inputs.empty()) {
      throw CLI::ValidationError("--text", "no inputs given");
    }
    std::ostringstream buffer;
    for (const std::string& text : inputs)
      buffer << predict_one(ckpt, vocab, text).dump() << "\n";
    if (out_path->empty()) {
      std::cout << buffer.str();
    } else {
      ensure_parent_dir(*out_path);
      std::ofstream out(*out_path);
      if (!out) throw std::runtime_error("cannot write " + *out_path);
      out << buffer.str();
    }
  });
}

void setup_subset(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "subset", "retrain with growing slices of one group's train data");
  auto corpus_path = std::make_shared<std::string>();
  auto classes_csv = std::make_shared<std::string>("hate,nothate");
  auto hateful_csv = std::make_shared<std::string>("hate");
  auto group = std::make_shared<std::string>();
  auto sizes_csv = std::make_shared<std::string>();
  auto mode = std::make_shared<std::string>("baseline");
  auto out_path = std::make_shared<std::string>();
  auto seed = std::make_shared<std::uint64_t>(1);
  auto min_test_count = std::make_shared<std::size_t>(25);
  auto model_flags = std::make_shared<ModelFlags>();
  auto train_flags = std::make_shared<TrainFlags>();

  cmd->add_option("--corpus", *corpus_path, "corpus file")->required();
  cmd->add_option("--classes", *classes_csv, "comma-separated class names");
  cmd->add_option("--hateful", *hateful_csv, "classes that count as hateful");
  cmd->add_option("--group", *group, "target group")->required();
  cmd->add_option("--sizes", *sizes_csv, "non-decreasing sizes, e.g. 0,10,25")
      ->required();
  cmd->add_option("--mode", *mode, "sense or baseline");
  cmd->add_option("--out", *out_path, "output file")->required();
  cmd->add_option("--seed", *seed, "seed");
  cmd->add_option("--min-test-count", *min_test_count,
                  "minimum test examples for a group to be reported");
  model_flags->attach(cmd);
  train_flags->attach(cmd);

  cmd->callback([=]() {
    ClassSet classes = make_class_set(*classes_csv, *hateful_csv);
    GroupedCorpus corpus = load_corpus(*corpus_path, classes.names);
    ModelConfig model = model_flags->to_config(*seed);
    TrainConfig train_config = train_flags->to_config(*seed);
    apply_mode(*mode, model, train_config);
    const std::vector<SubsetPoint> curve =
        subset_experiment(corpus, classes, *group, parse_size_list(*sizes_csv),
                          model, train_config, *min_test_count);
    nlohmann::json points = nlohmann::json::array();
    for (const SubsetPoint& p : curve) {
      nlohmann::json groups = nlohmann::json::object();
      for (const auto& [name, acc] : p.group_accuracy) groups[name] = acc;
      points.push_back({{"size", p.size},
                        {"group_accuracy", std::move(groups)},
                        {"overall_accuracy", p.overall_accuracy}});
    }
    nlohmann::json j;
    j["group"] = *group;
    j["mode"] = *mode;
    j["points"] = std::move(points);
    ensure_parent_dir(*out_path);
    std::ofstream out(*out_path);
    if (!out) throw std::runtime_error("cannot write " + *out_path);
    out << j.dump() << "\n";
    std::cout << j.dump() << "\n";
  });
}

struct ExperimentFlagPack {
  std::shared_ptr<std::string> corpus_path = std::make_shared<std::string>();
  std::shared_ptr<std::string> classes_csv =
      std::make_shared<std::string>("hate,nothate");
  std::shared_ptr<std::string> hateful_csv = std::make_shared<std::string>("hate");
  std::shared_ptr<std::string> seeds_csv =
      std::make_shared<std::string>("1,2,3,4,5");
  std::shared_ptr<std::string> out_dir = std::make_shared<std::string>();
  std::shared_ptr<std::size_t> min_test_count = std::make_shared<std::size_t>(25);
  std::shared_ptr<std::size_t> overlap_k = std::make_shared<std::size_t>(100);
  std::shared_ptr<ModelFlags> model_flags = std::make_shared<ModelFlags>();
  std::shared_ptr<TrainFlags> train_flags = std::make_shared<TrainFlags>();

  void attach(CLI::App* cmd) const {
    cmd->add_option("--corpus", *corpus_path, "corpus file")->required();
    cmd->add_option("--classes", *classes_csv, "comma-separated class names");
    cmd->add_option("--hateful", *hateful_csv, "classes that count as hateful");
    cmd->add_option("--seeds", *seeds_csv, "comma-separated seed list");
    cmd->add_option("--out", *out_dir, "output directory")->required();
    cmd->add_option("--min-test-count", *min_test_count,
                    "minimum test examples for a group to be reported");
    cmd->add_option("--overlap-k", *overlap_k, "top-K for the word overlap");
    model_flags->attach(cmd);
    train_flags->attach(cmd);
  }

  ExperimentSpec to_spec(GroupedCorpus* corpus_out) const {
    ExperimentSpec spec;
    spec.classes = make_class_set(*classes_csv, *hateful_csv);
    *corpus_out = load_corpus(*corpus_path, spec.classes.names);
    spec.model = model_flags->to_config(1);
    spec.train_config = train_flags->to_config(1);
    spec.audit.min_test_count = *min_test_count;
    spec.audit.overlap_k = *overlap_k;
    spec.seeds = parse_seed_list(*seeds_csv);
    spec.out_dir = *out_dir;
    return spec;
  }
};

void setup_experiment(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "experiment", "baseline-vs-sense dispersion experiment over seeds");
  auto pack = std::make_shared<ExperimentFlagPack>();
  auto mode_a = std::make_shared<std::string>("baseline");
  auto mode_b = std::make_shared<std::string>("sense");
  pack->attach(cmd);
  cmd->add_option("--mode-a", *mode_a, "reference mode");
  cmd->add_option("--mode-b", *mode_b, "candidate mode");

  cmd->callback([=]() {
    GroupedCorpus corpus;
    ExperimentSpec spec = pack->to_spec(&corpus);
    spec.mode_a = *mode_a;
    spec.mode_b = *mode_b;
    ExperimentSummary summary = run_dispersion_experiment(spec, corpus);
    std::cout << "median dispersion delta  " << summary.median_dispersion_delta
              << (summary.dispersion_reduced ? "  (reduced)" : "") << "\n";
    std::cout << "median average delta     " << summary.median_average_delta
              << (summary.average_improved ? "  (improved)" : "") << "\n";
    std::cout << "median overall delta     " << summary.median_overall_delta
              << (summary.overall_within_tolerance ? "  (within tolerance)" : "")
              << "\n";
    std::cout << "summary written to " << spec.out_dir << "/summary.json\n";
  });
}

void setup_curve(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "curve", "subset-size accuracy curve for one group, median over seeds");
  auto pack = std::make_shared<ExperimentFlagPack>();
  auto group = std::make_shared<std::string>();
  auto sizes_csv = std::make_shared<std::string>();
  auto mode = std::make_shared<std::string>("baseline");
  auto svg_path = std::make_shared<std::string>();
  pack->attach(cmd);
  cmd->add_option("--group", *group, "target group")->required();
  cmd->add_option("--sizes", *sizes_csv, "non-decreasing sizes")->required();
  cmd->add_option("--mode", *mode, "sense or baseline");
  cmd->add_option("--svg", *svg_path, "optional SVG plot path");

  cmd->callback([=]() {
    GroupedCorpus corpus;
    ExperimentSpec spec = pack->to_spec(&corpus);
    CurveArtifact curve = run_fig3_curve(spec, corpus, *group,
                                         parse_size_list(*sizes_csv), *mode);
    if (!svg_path->empty()) {
      ensure_parent_dir(*svg_path);
      write_curve_svg(curve, *svg_path);
    }
    std::cout << "median curve:";
    for (std::size_t i = 0; i < curve.sizes.size(); ++i)
      std::cout << " " << curve.sizes[i] << ":"
                << curve.median_group_accuracy[i];
    std::cout << "\n";
  });
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"token-level hate sense disambiguation with per-group bias audits"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  setup_synth(app);
  setup_train(app);
  setup_evaluate(app);
  setup_audit(app);
  setup_compare(app);
  setup_predict(app);
  setup_subset(app);
  setup_experiment(app);
  setup_curve(app);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace hatesense::cli
