#include "hatesense/sense.hpp"

#include <stdexcept>

namespace hatesense {

void ClassSet::validate() const {
  if (names.size() < 2) {
    throw std::invalid_argument("class set needs at least 2 classes");
  }
  if (names.size() != hateful.size()) {
    throw std::invalid_argument("class set names and hateful mask differ in size");
  }
  bool any_hateful = false, any_benign = false;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i].empty()) {
      throw std::invalid_argument("class names must be nonempty");
    }
    (hateful[i] ? any_hateful : any_benign) = true;
  }
  if (!any_hateful || !any_benign) {
    throw std::invalid_argument(
        "class set needs at least one hateful and one non-hateful class");
  }
}

std::size_t ClassSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  throw std::invalid_argument("class \"" + name + "\" not in class set");
}

std::vector<std::size_t> ClassSet::hateful_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < hateful.size(); ++i)
    if (hateful[i]) out.push_back(i);
  return out;
}

ClassifierHeadParams ClassifierHeadParams::init(std::size_t d_in,
                                                std::size_t d_hidden,
                                                std::size_t k, Rng& rng) {
  ClassifierHeadParams p;
  p.w1 = Tensor::zeros({d_in, d_hidden}, true);
  for (double& v : p.w1.data()) v = rng.normal(0.0, 0.02);
  p.b1 = Tensor::zeros({1, d_hidden}, true);
  p.w2 = Tensor::zeros({d_hidden, k}, true);
  for (double& v : p.w2.data()) v = rng.normal(0.0, 0.02);
  p.b2 = Tensor::zeros({1, k}, true);
  return p;
}

std::vector<std::pair<std::string, Tensor>> ClassifierHeadParams::named() const {
  return {{"head.w1", w1}, {"head.b1", b1}, {"head.w2", w2}, {"head.b2", b2}};
}

ClassifierHeadParams ClassifierHeadParams::clone() const {
  ClassifierHeadParams c;
  c.w1 = w1.clone();
  c.b1 = b1.clone();
  c.w2 = w2.clone();
  c.b2 = b2.clone();
  return c;
}

ModelParams ModelParams::init(const ModelConfig& config, std::size_t n_classes) {
  ModelParams p;
  p.encoder = EncoderParams::init(config.encoder);
  // A distinct stream keeps head init independent of encoder depth.
  Rng head_rng = Rng(config.encoder.seed).fork(0x68656164);
  p.head = ClassifierHeadParams::init(config.encoder.d_model,
                                      config.head_hidden(), n_classes, head_rng);
  return p;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named() const {
  auto out = encoder.named();
  for (auto& item : head.named()) out.push_back(std::move(item));
  return out;
}

ModelParams ModelParams::clone() const {
  ModelParams c;
  c.encoder = encoder.clone();
  c.head = head.clone();
  return c;
}

void ModelParams::zero_grad() {
  for (auto& [name, tensor] : named()) tensor.zero_grad();
}

bool ModelParams::all_finite() const {
  for (const auto& [name, tensor] : named())
    if (!tensor.all_finite()) return false;
  return true;
}

SenseAssignment assign_senses(Tape& tape, const Tensor& token_reps,
                              const Tensor& class_reps, double temperature) {
  if (temperature <= 0.0) {
    throw std::invalid_argument("assign_senses: temperature must be positive");
  }
  if (class_reps.rows() < 2) {
    throw std::invalid_argument("assign_senses: need at least 2 classes");
  }
  Tensor cosines = tape.cosine_matrix(token_reps, class_reps);
  Tensor scaled = temperature == 1.0
                      ? cosines
                      : tape.scale(cosines, 1.0 / temperature);
  SenseAssignment assignment;
  assignment.distributions = tape.softmax(scaled, 1);
  const std::size_t n = token_reps.rows(), k = class_reps.rows();
  assignment.senses.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (assignment.distributions.at(i, j) >
          assignment.distributions.at(i, best)) {
        best = j;  // ties keep the lowest class index
      }
    }
    assignment.senses[i] = best;
  }
  return assignment;
}

Tensor augment(Tape& tape, const Tensor& token_reps, const Tensor& class_reps,
               const SenseAssignment& assignment) {
  if (assignment.senses.size() != token_reps.rows()) {
    throw std::invalid_argument(
        "augment: assignment does not match token count");
  }
  return tape.add(token_reps, tape.row_gather(class_reps, assignment.senses));
}

Tensor augment_soft(Tape& tape, const Tensor& token_reps,
                    const Tensor& class_reps,
                    const SenseAssignment& assignment) {
  return tape.add(token_reps,
                  tape.matmul(assignment.distributions, class_reps));
}

Tensor classify(Tape& tape, const Tensor& augmented,
                const ClassifierHeadParams& head) {
  if (augmented.rows() < 1) {
    throw std::invalid_argument("classify: empty input");
  }
  Tensor pooled = tape.max_pool_over_time(augmented).values;
  Tensor hidden =
      tape.gelu(tape.add_rowvec(tape.matmul(pooled, head.w1), head.b1));
  return tape.add_rowvec(tape.matmul(hidden, head.w2), head.b2);
}

std::size_t argmax_lowest(const Tensor& logits) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < logits.size(); ++j)
    if (logits.at(j) > logits.at(best)) best = j;
  return best;
}

Prediction forward(Tape& tape, const ModelParams& params,
                   const ModelConfig& config, const ClassSet& classes,
                   const Vocabulary& vocab, const TokenSequence& seq,
                   bool train_mode, Rng* dropout_rng) {
  classes.validate();
  Tensor token_reps =
      encode(tape, params.encoder, seq, train_mode, dropout_rng);
  Prediction prediction;
  if (config.sense_augmentation) {
    Tensor class_reps = encode_class_names(tape, params.encoder, classes.names,
                                           vocab, train_mode, dropout_rng);
    prediction.assignment =
        assign_senses(tape, token_reps, class_reps, config.temperature);
    prediction.has_senses = true;
    Tensor augmented =
        config.soft_augment
            ? augment_soft(tape, token_reps, class_reps, prediction.assignment)
            : augment(tape, token_reps, class_reps, prediction.assignment);
    prediction.logits = classify(tape, augmented, params.head);
  } else {
    prediction.logits = classify(tape, token_reps, params.head);
  }
  prediction.predicted = argmax_lowest(prediction.logits);
  return prediction;
}

}  // namespace hatesense
