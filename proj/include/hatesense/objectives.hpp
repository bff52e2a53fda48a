#pragma once

#include <vector>

#include "hatesense/sense.hpp"
#include "hatesense/tensor.hpp"

namespace hatesense {

struct LossWeights {
  double cls = 1.0;
  double consensus = 0.5;
  double unique = 0.1;

  void validate() const;
};

struct LossBreakdown {
  double total = 0.0;
  double cls = 0.0;
  double consensus = 0.0;
  double unique = 0.0;
};

// The most frequent hateful sense among the tokens; ties go to the lowest
// class index. When no hateful sense occurs, falls back to the lowest-index
// non-hateful class so the selector is total.
std::size_t consensus_hard(const std::vector<std::size_t>& senses,
                           const std::vector<bool>& hateful_mask);

// Number of distinct hateful classes appearing among the senses.
std::size_t unique_hard(const std::vector<std::size_t>& senses,
                        const std::vector<bool>& hateful_mask);

// Differentiable surrogate for matching the sense consensus to the label:
// cross-entropy between the token-averaged sense distribution and y,
// i.e. -log(mean_i distributions[i][y]).
Tensor consensus_loss(Tape& tape, const Tensor& distributions,
                      std::size_t label);

// Differentiable surrogate for the count of unique hateful senses: the L1
// norm of the per-hateful-class maximum token probability. Equals the hard
// count exactly on one-hot rows.
Tensor unique_loss(Tape& tape, const Tensor& distributions,
                   const std::vector<bool>& hateful_mask);

struct TotalLoss {
  Tensor total;  // scalar on the tape
  LossBreakdown breakdown;
};

// cls = cross-entropy(logits, y); auxiliary terms only when the prediction
// carries a sense assignment and their weights are nonzero.
TotalLoss total_loss(Tape& tape, const Prediction& prediction,
                     std::size_t label, const std::vector<bool>& hateful_mask,
                     const LossWeights& weights);

}  // namespace hatesense
