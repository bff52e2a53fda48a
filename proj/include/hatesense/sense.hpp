#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hatesense/encoder.hpp"
#include "hatesense/tensor.hpp"
#include "hatesense/text.hpp"

namespace hatesense {

// The named classification classes plus which of them count as hateful
// senses.
struct ClassSet {
  std::vector<std::string> names;
  std::vector<bool> hateful;

  void validate() const;
  std::size_t size() const { return names.size(); }
  std::size_t index_of(const std::string& name) const;
  std::vector<std::size_t> hateful_indices() const;
};

// Per-token sense distributions (rows sum to 1) and their argmax senses.
struct SenseAssignment {
  Tensor distributions;             // [n x k]
  std::vector<std::size_t> senses;  // argmax per token, ties -> lowest index
};

struct ClassifierHeadParams {
  Tensor w1, b1, w2, b2;

  static ClassifierHeadParams init(std::size_t d_in, std::size_t d_hidden,
                                   std::size_t k, Rng& rng);
  std::vector<std::pair<std::string, Tensor>> named() const;
  ClassifierHeadParams clone() const;
};

struct ModelConfig {
  EncoderConfig encoder;
  std::size_t max_vocab = 4096;
  std::size_t d_hidden = 0;  // 0 -> d_model
  double temperature = 1.0;
  // Off -> plain encode -> max-pool -> MLP baseline; no sense machinery runs.
  bool sense_augmentation = true;
  // Weighted sum over all class vectors instead of the argmax selection.
  bool soft_augment = false;

  std::size_t head_hidden() const {
    return d_hidden == 0 ? encoder.d_model : d_hidden;
  }
};

struct ModelParams {
  EncoderParams encoder;
  ClassifierHeadParams head;

  static ModelParams init(const ModelConfig& config, std::size_t n_classes);
  std::vector<std::pair<std::string, Tensor>> named() const;
  ModelParams clone() const;
  void zero_grad();
  bool all_finite() const;
};

struct Prediction {
  Tensor logits;  // [1 x k]
  std::size_t predicted = 0;
  bool has_senses = false;
  SenseAssignment assignment;
};

// distributions[i][j] = softmax_j(cos(token_i, class_j) / temperature).
SenseAssignment assign_senses(Tape& tape, const Tensor& token_reps,
                              const Tensor& class_reps, double temperature);

// Row i of the result is token_reps[i] + class_reps[senses[i]]. Gradients
// flow into the selected class rows but not through the argmax itself.
Tensor augment(Tape& tape, const Tensor& token_reps, const Tensor& class_reps,
               const SenseAssignment& assignment);

// Soft variant: token_reps + distributions . class_reps.
Tensor augment_soft(Tape& tape, const Tensor& token_reps,
                    const Tensor& class_reps, const SenseAssignment& assignment);

// Max-pool over tokens, then a 2-layer MLP to class logits.
Tensor classify(Tape& tape, const Tensor& augmented,
                const ClassifierHeadParams& head);

std::size_t argmax_lowest(const Tensor& logits);

// encode -> encode_class_names -> assign_senses -> augment -> classify.
// With sense_augmentation off this is exactly encode -> max-pool -> MLP.
Prediction forward(Tape& tape, const ModelParams& params,
                   const ModelConfig& config, const ClassSet& classes,
                   const Vocabulary& vocab, const TokenSequence& seq,
                   bool train_mode = false, Rng* dropout_rng = nullptr);

}  // namespace hatesense
