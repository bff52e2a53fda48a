#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hatesense/tensor.hpp"
#include "hatesense/text.hpp"

namespace hatesense {

struct EncoderConfig {
  std::size_t vocab_size = 0;  // filled from the built vocabulary
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::size_t d_ff = 128;
  std::size_t max_len = 64;
  double dropout_rate = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct EncoderLayerParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor ln1_gain, ln1_offset;
  Tensor w_ff1, b_ff1, w_ff2, b_ff2;
  Tensor ln2_gain, ln2_offset;
};

struct EncoderParams {
  EncoderConfig config;
  Tensor token_embedding;     // [vocab_size x d_model]
  Tensor position_embedding;  // [max_len x d_model]
  std::vector<EncoderLayerParams> layers;

  // Embeddings and projections start at normal(0, 0.02), layer norms at
  // ones/zeros; all from the config seed.
  static EncoderParams init(const EncoderConfig& config);
  std::vector<std::pair<std::string, Tensor>> named() const;
  EncoderParams clone() const;
};

// Contextual representations for the first seq.length tokens, [n x d_model].
// Pad positions never enter attention. Deterministic when train_mode is off.
Tensor encode(Tape& tape, const EncoderParams& params, const TokenSequence& seq,
              bool train_mode = false, Rng* dropout_rng = nullptr);

// Each class name is tokenized, encoded, and mean-pooled over its tokens,
// giving [k x d_model]. Recomputed per call so gradients reach the encoder
// through the class names.
Tensor encode_class_names(Tape& tape, const EncoderParams& params,
                          const std::vector<std::string>& names,
                          const Vocabulary& vocab, bool train_mode = false,
                          Rng* dropout_rng = nullptr);

}  // namespace hatesense
