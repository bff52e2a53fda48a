#include "hatesense/train.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hatesense/audit.hpp"

namespace hatesense {

void TrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0) {
    throw std::invalid_argument("train config extents must be positive");
  }
  if (learning_rate <= 0.0) {
    throw std::invalid_argument("learning_rate must be > 0");
  }
  weights.validate();
}

AdamOptimizer::AdamOptimizer(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::step(
    const std::vector<std::pair<std::string, Tensor>>& params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i].second.size(), 0.0);
      v_[i].assign(params[i].second.size(), 0.0);
    }
  }
  if (m_.size() != params.size()) {
    throw std::logic_error("optimizer was initialized with a different "
                           "parameter list");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor tensor = params[i].second;
    auto& data = tensor.data();
    const auto& grad = tensor.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * grad[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * grad[j] * grad[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      data[j] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

namespace {

// Train/dev/test sequences are materialized once; empty texts are kept out
// of training but still predicted (as class 0) during evaluation.
struct PreparedSplit {
  std::vector<std::size_t> corpus_indices;
  std::vector<TokenSequence> sequences;
  std::vector<std::size_t> labels;
};

PreparedSplit prepare_split(const GroupedCorpus& corpus, const Vocabulary& vocab,
                            std::size_t max_len, Split split) {
  PreparedSplit out;
  for (std::size_t idx : corpus.split_indices(split)) {
    const Example& ex = corpus.examples()[idx];
    out.corpus_indices.push_back(idx);
    out.sequences.push_back(make_sequence(vocab, ex.text, max_len));
    out.labels.push_back(corpus.label_index(ex.label));
  }
  return out;
}

double split_accuracy(const ModelParams& params, const ModelConfig& config,
                      const ClassSet& classes, const Vocabulary& vocab,
                      const PreparedSplit& split) {
  if (split.sequences.empty()) return 0.0;
  Tape tape;
  tape.set_recording(false);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < split.sequences.size(); ++i) {
    std::size_t predicted = 0;
    if (split.sequences[i].length > 0) {
      predicted =
          forward(tape, params, config, classes, vocab, split.sequences[i])
              .predicted;
    }
    if (predicted == split.labels[i]) ++correct;
  }
  return static_cast<double>(correct) /
         static_cast<double>(split.sequences.size());
}

}  // namespace

TrainResult train(const GroupedCorpus& corpus, const ClassSet& classes,
                  const Vocabulary& vocab, const ModelConfig& model_config,
                  const TrainConfig& train_config) {
  train_config.validate();
  classes.validate();
  if (corpus.split_size(Split::kTrain) == 0) {
    throw std::invalid_argument("train: corpus has no train split");
  }
  if (corpus.split_size(Split::kDev) == 0) {
    throw std::invalid_argument("train: corpus has no dev split");
  }

  ModelConfig config = model_config;
  config.encoder.vocab_size = vocab.size();
  ModelParams params = ModelParams::init(config, classes.size());

  PreparedSplit train_split =
      prepare_split(corpus, vocab, config.encoder.max_len, Split::kTrain);
  PreparedSplit dev_split =
      prepare_split(corpus, vocab, config.encoder.max_len, Split::kDev);

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < train_split.sequences.size(); ++i)
    if (train_split.sequences[i].length > 0) order.push_back(i);
  if (order.empty()) {
    throw std::invalid_argument("train: every train example tokenized empty");
  }

  Rng base_rng(train_config.seed);
  AdamOptimizer optimizer(train_config.learning_rate, train_config.adam_beta1,
                          train_config.adam_beta2, train_config.adam_eps);
  const auto named = params.named();
  const std::vector<bool>& hateful_mask = classes.hateful;

  TrainResult result;
  result.config = config;
  Tape tape;

  std::size_t epochs_since_best = 0;
  for (std::size_t epoch = 1; epoch <= train_config.epochs; ++epoch) {
    Rng epoch_rng = base_rng.fork(epoch);
    Rng dropout_rng = epoch_rng.fork(0xd0);
    epoch_rng.shuffle(order);

    LossBreakdown epoch_loss;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size();
         start += train_config.batch_size) {
      const std::size_t end =
          std::min(order.size(), start + train_config.batch_size);
      tape.reset();
      params.zero_grad();
      Tensor batch_total;
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = order[b];
        Prediction prediction =
            forward(tape, params, config, classes, vocab,
                    train_split.sequences[i], /*train_mode=*/true, &dropout_rng);
        TotalLoss example_loss =
            total_loss(tape, prediction, train_split.labels[i], hateful_mask,
                       train_config.weights);
        epoch_loss.total += example_loss.breakdown.total;
        epoch_loss.cls += example_loss.breakdown.cls;
        epoch_loss.consensus += example_loss.breakdown.consensus;
        epoch_loss.unique += example_loss.breakdown.unique;
        batch_total = batch_total.valid()
                          ? tape.add(batch_total, example_loss.total)
                          : example_loss.total;
      }
      seen += end - start;
      Tensor batch_mean =
          tape.scale(batch_total, 1.0 / static_cast<double>(end - start));
      if (!std::isfinite(batch_mean.value())) {
        throw std::runtime_error(
            "training diverged: non-finite loss at epoch " +
            std::to_string(epoch) + ", batch starting at example " +
            std::to_string(start));
      }
      tape.backward(batch_mean);
      optimizer.step(named);
    }

    EpochStats stats;
    stats.loss.total = epoch_loss.total / static_cast<double>(seen);
    stats.loss.cls = epoch_loss.cls / static_cast<double>(seen);
    stats.loss.consensus = epoch_loss.consensus / static_cast<double>(seen);
    stats.loss.unique = epoch_loss.unique / static_cast<double>(seen);
    stats.dev_accuracy =
        split_accuracy(params, config, classes, vocab, dev_split);
    result.history.push_back(stats);

    // Ties keep the later epoch: once dev accuracy saturates, the most
    // converged parameters win.
    if (result.best_epoch == 0 ||
        stats.dev_accuracy >= result.best_dev_accuracy) {
      result.best_epoch = epoch;
      result.best_dev_accuracy = stats.dev_accuracy;
      result.params = params.clone();
      epochs_since_best = 0;
    } else if (train_config.patience > 0 &&
               ++epochs_since_best >= train_config.patience) {
      break;
    }
  }
  return result;
}

std::vector<std::size_t> predict_split(const ModelParams& params,
                                       const ModelConfig& config,
                                       const ClassSet& classes,
                                       const Vocabulary& vocab,
                                       const GroupedCorpus& corpus,
                                       Split split) {
  Tape tape;
  tape.set_recording(false);
  std::vector<std::size_t> predictions;
  for (std::size_t idx : corpus.split_indices(split)) {
    const Example& ex = corpus.examples()[idx];
    TokenSequence seq = make_sequence(vocab, ex.text, config.encoder.max_len);
    if (seq.length == 0) {
      predictions.push_back(0);
      continue;
    }
    predictions.push_back(
        forward(tape, params, config, classes, vocab, seq).predicted);
  }
  return predictions;
}

double accuracy(const ModelParams& params, const ModelConfig& config,
                const ClassSet& classes, const Vocabulary& vocab,
                const GroupedCorpus& corpus, Split split) {
  const std::vector<std::size_t> indices = corpus.split_indices(split);
  if (indices.empty()) return 0.0;
  const std::vector<std::size_t> predictions =
      predict_split(params, config, classes, vocab, corpus, split);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (predictions[i] ==
        corpus.label_index(corpus.examples()[indices[i]].label))
      ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

std::vector<SubsetPoint> subset_experiment(
    const GroupedCorpus& corpus, const ClassSet& classes,
    const std::string& group, const std::vector<std::size_t>& sizes,
    const ModelConfig& model_config, const TrainConfig& train_config,
    std::size_t min_test_count) {
  auto group_it = corpus.group_index().find(group);
  if (group_it == corpus.group_index().end()) {
    throw std::invalid_argument("subset_experiment: unknown group \"" + group +
                                "\"");
  }
  std::vector<std::size_t> group_train;
  for (std::size_t idx : group_it->second)
    if (corpus.examples()[idx].split == Split::kTrain) group_train.push_back(idx);

  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i > 0 && sizes[i] < sizes[i - 1]) {
      throw std::invalid_argument("subset_experiment: sizes must be "
                                  "non-decreasing");
    }
    if (sizes[i] > group_train.size()) {
      throw std::invalid_argument(
          "subset_experiment: size " + std::to_string(sizes[i]) +
          " exceeds the " + std::to_string(group_train.size()) +
          " available \"" + group + "\" train examples");
    }
  }

  std::vector<SubsetPoint> curve;
  for (std::size_t size : sizes) {
    // Seeded subsample of the group's train examples; everything else kept.
    std::vector<std::size_t> pool = group_train;
    Rng subsample_rng = Rng(train_config.seed).fork(0x5b5 + size);
    subsample_rng.shuffle(pool);
    pool.resize(size);
    std::sort(pool.begin(), pool.end());
    std::vector<bool> selected(corpus.examples().size(), false);
    for (std::size_t idx : pool) selected[idx] = true;

    std::vector<Example> filtered;
    for (std::size_t i = 0; i < corpus.examples().size(); ++i) {
      const Example& ex = corpus.examples()[i];
      const bool in_group =
          std::find(ex.groups.begin(), ex.groups.end(), group) != ex.groups.end();
      if (ex.split == Split::kTrain && in_group && !selected[i]) continue;
      filtered.push_back(ex);
    }
    GroupedCorpus subset =
        GroupedCorpus::from_examples(std::move(filtered), corpus.class_names());

    Vocabulary vocab =
        Vocabulary::build(subset, model_config.max_vocab, classes.names);
    TrainResult trained =
        train(subset, classes, vocab, model_config, train_config);
    const std::vector<std::size_t> predictions =
        predict_split(trained.params, trained.config, classes, vocab, subset,
                      Split::kTest);

    SubsetPoint point;
    point.size = size;
    for (const GroupAccuracy& g :
         per_group_accuracy(predictions, subset, min_test_count)) {
      point.group_accuracy.emplace_back(g.group, g.accuracy);
    }
    const std::vector<std::size_t> test_indices =
        subset.split_indices(Split::kTest);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test_indices.size(); ++i) {
      if (predictions[i] ==
          subset.label_index(subset.examples()[test_indices[i]].label))
        ++correct;
    }
    point.overall_accuracy =
        test_indices.empty()
            ? 0.0
            : static_cast<double>(correct) /
                  static_cast<double>(test_indices.size());
    curve.push_back(std::move(point));
  }
  return curve;
}

}  // namespace hatesense
