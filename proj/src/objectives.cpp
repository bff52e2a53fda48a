#include "hatesense/objectives.hpp"

#include <stdexcept>

namespace hatesense {

void LossWeights::validate() const {
  if (cls <= 0.0) {
    throw std::invalid_argument("loss weight for classification must be > 0");
  }
  if (consensus < 0.0 || unique < 0.0) {
    throw std::invalid_argument("auxiliary loss weights must be >= 0");
  }
}

std::size_t consensus_hard(const std::vector<std::size_t>& senses,
                           const std::vector<bool>& hateful_mask) {
  if (senses.empty()) {
    throw std::invalid_argument("consensus_hard: empty sense list");
  }
  std::vector<std::size_t> counts(hateful_mask.size(), 0);
  for (std::size_t s : senses) {
    if (s >= hateful_mask.size()) {
      throw std::out_of_range("consensus_hard: sense index out of range");
    }
    ++counts[s];
  }
  std::size_t best = hateful_mask.size();
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (!hateful_mask[j] || counts[j] == 0) continue;
    if (best == hateful_mask.size() || counts[j] > counts[best]) best = j;
  }
  if (best != hateful_mask.size()) return best;
  for (std::size_t j = 0; j < hateful_mask.size(); ++j)
    if (!hateful_mask[j]) return j;
  throw std::invalid_argument("consensus_hard: mask has no non-hateful class");
}

std::size_t unique_hard(const std::vector<std::size_t>& senses,
                        const std::vector<bool>& hateful_mask) {
  if (senses.empty()) {
    throw std::invalid_argument("unique_hard: empty sense list");
  }
  std::vector<bool> seen(hateful_mask.size(), false);
  std::size_t count = 0;
  for (std::size_t s : senses) {
    if (s >= hateful_mask.size()) {
      throw std::out_of_range("unique_hard: sense index out of range");
    }
    if (hateful_mask[s] && !seen[s]) {
      seen[s] = true;
      ++count;
    }
  }
  return count;
}

Tensor consensus_loss(Tape& tape, const Tensor& distributions,
                      std::size_t label) {
  if (label >= distributions.cols()) {
    throw std::out_of_range("consensus_loss: label out of range");
  }
  Tensor averaged = tape.mean_rows(distributions);
  return tape.scale(tape.log(tape.pick(averaged, label)), -1.0);
}

Tensor unique_loss(Tape& tape, const Tensor& distributions,
                   const std::vector<bool>& hateful_mask) {
  if (distributions.cols() != hateful_mask.size()) {
    throw std::invalid_argument("unique_loss: mask size does not match classes");
  }
  Tensor per_class_max = tape.max_pool_over_time(distributions).values;
  const std::size_t k = hateful_mask.size();
  std::vector<double> mask(k);
  for (std::size_t j = 0; j < k; ++j) mask[j] = hateful_mask[j] ? 1.0 : 0.0;
  Tensor masked =
      tape.mul(per_class_max, Tensor::from_data({1, k}, std::move(mask)));
  return tape.l1_norm(masked);
}

TotalLoss total_loss(Tape& tape, const Prediction& prediction,
                     std::size_t label, const std::vector<bool>& hateful_mask,
                     const LossWeights& weights) {
  weights.validate();
  Tensor cls = tape.cross_entropy_with_logits(prediction.logits, label);
  TotalLoss result;
  result.breakdown.cls = cls.value();
  Tensor total = weights.cls == 1.0 ? cls : tape.scale(cls, weights.cls);
  if (prediction.has_senses && weights.consensus > 0.0) {
    Tensor consensus =
        consensus_loss(tape, prediction.assignment.distributions, label);
    result.breakdown.consensus = consensus.value();
    total = tape.add(total, tape.scale(consensus, weights.consensus));
  }
  if (prediction.has_senses && weights.unique > 0.0) {
    Tensor unique =
        unique_loss(tape, prediction.assignment.distributions, hateful_mask);
    result.breakdown.unique = unique.value();
    total = tape.add(total, tape.scale(unique, weights.unique));
  }
  result.total = total;
  result.breakdown.total = weights.cls * result.breakdown.cls +
                           weights.consensus * result.breakdown.consensus +
                           weights.unique * result.breakdown.unique;
  return result;
}

}  // namespace hatesense
