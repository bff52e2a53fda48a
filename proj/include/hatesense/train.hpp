#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hatesense/objectives.hpp"
#include "hatesense/sense.hpp"
#include "hatesense/text.hpp"

namespace hatesense {

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  double learning_rate = 3e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  LossWeights weights;
  // 0 disables early stopping; otherwise stop after this many epochs
  // without a dev-accuracy improvement.
  std::size_t patience = 0;

  void validate() const;
};

struct EpochStats {
  LossBreakdown loss;    // mean over batches
  double dev_accuracy = 0.0;
};

struct TrainResult {
  ModelParams params;  // best-dev parameters
  ModelConfig config;
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;  // 1-based
  double best_dev_accuracy = 0.0;
};

class AdamOptimizer {
 public:
  AdamOptimizer(double lr, double beta1, double beta2, double eps);
  // Applies one update from the accumulated gradients; parameter order
  // must be identical across calls.
  void step(const std::vector<std::pair<std::string, Tensor>>& params);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Deterministic training: per-epoch shuffles, batched Adam updates on the
// weighted total loss, best-dev-accuracy model selection. Aborts with a
// diagnostic when the loss stops being finite.
TrainResult train(const GroupedCorpus& corpus, const ClassSet& classes,
                  const Vocabulary& vocab, const ModelConfig& model_config,
                  const TrainConfig& train_config);

// Predicted class index per example of the split, in corpus order.
std::vector<std::size_t> predict_split(const ModelParams& params,
                                       const ModelConfig& config,
                                       const ClassSet& classes,
                                       const Vocabulary& vocab,
                                       const GroupedCorpus& corpus,
                                       Split split);

double accuracy(const ModelParams& params, const ModelConfig& config,
                const ClassSet& classes, const Vocabulary& vocab,
                const GroupedCorpus& corpus, Split split);

struct SubsetPoint {
  std::size_t size = 0;
  std::vector<std::pair<std::string, double>> group_accuracy;
  double overall_accuracy = 0.0;
};

// Retrains from scratch for every size, keeping all non-target-group train
// data and a seeded subsample of the target group's train data.
std::vector<SubsetPoint> subset_experiment(
    const GroupedCorpus& corpus, const ClassSet& classes,
    const std::string& group, const std::vector<std::size_t>& sizes,
    const ModelConfig& model_config, const TrainConfig& train_config,
    std::size_t min_test_count);

}  // namespace hatesense
