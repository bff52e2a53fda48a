#include "hatesense/encoder.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hatesense {

void EncoderConfig::validate() const {
  if (vocab_size == 0 || d_model == 0 || n_heads == 0 || d_ff == 0 ||
      max_len == 0) {
    throw std::invalid_argument("encoder config extents must be positive");
  }
  if (d_model % n_heads != 0) {
    throw std::invalid_argument("d_model (" + std::to_string(d_model) +
                                ") must be divisible by n_heads (" +
                                std::to_string(n_heads) + ")");
  }
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw std::invalid_argument("dropout_rate must be in [0, 1)");
  }
}

namespace {

Tensor init_normal(Shape shape, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
  for (double& v : t.data()) v = rng.normal(0.0, 0.02);
  return t;
}

Tensor init_zeros(Shape shape) {
  return Tensor::zeros(std::move(shape), /*requires_grad=*/true);
}

Tensor init_ones(Shape shape) {
  Tensor t = Tensor::full(std::move(shape), 1.0);
  t.set_requires_grad(true);
  return t;
}

}  // namespace

EncoderParams EncoderParams::init(const EncoderConfig& config) {
  config.validate();
  Rng rng(config.seed);
  EncoderParams p;
  p.config = config;
  const std::size_t d = config.d_model;
  p.token_embedding = init_normal({config.vocab_size, d}, rng);
  p.position_embedding = init_normal({config.max_len, d}, rng);
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    EncoderLayerParams layer;
    layer.wq = init_normal({d, d}, rng);
    layer.bq = init_zeros({1, d});
    layer.wk = init_normal({d, d}, rng);
    layer.bk = init_zeros({1, d});
    layer.wv = init_normal({d, d}, rng);
    layer.bv = init_zeros({1, d});
    layer.wo = init_normal({d, d}, rng);
    layer.bo = init_zeros({1, d});
    layer.ln1_gain = init_ones({1, d});
    layer.ln1_offset = init_zeros({1, d});
    layer.w_ff1 = init_normal({d, config.d_ff}, rng);
    layer.b_ff1 = init_zeros({1, config.d_ff});
    layer.w_ff2 = init_normal({config.d_ff, d}, rng);
    layer.b_ff2 = init_zeros({1, d});
    layer.ln2_gain = init_ones({1, d});
    layer.ln2_offset = init_zeros({1, d});
    p.layers.push_back(std::move(layer));
  }
  return p;
}

std::vector<std::pair<std::string, Tensor>> EncoderParams::named() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("token_embedding", token_embedding);
  out.emplace_back("position_embedding", position_embedding);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    const EncoderLayerParams& layer = layers[l];
    out.emplace_back(prefix + "wq", layer.wq);
    out.emplace_back(prefix + "bq", layer.bq);
    out.emplace_back(prefix + "wk", layer.wk);
    out.emplace_back(prefix + "bk", layer.bk);
    out.emplace_back(prefix + "wv", layer.wv);
    out.emplace_back(prefix + "bv", layer.bv);
    out.emplace_back(prefix + "wo", layer.wo);
    out.emplace_back(prefix + "bo", layer.bo);
    out.emplace_back(prefix + "ln1_gain", layer.ln1_gain);
    out.emplace_back(prefix + "ln1_offset", layer.ln1_offset);
    out.emplace_back(prefix + "w_ff1", layer.w_ff1);
    out.emplace_back(prefix + "b_ff1", layer.b_ff1);
    out.emplace_back(prefix + "w_ff2", layer.w_ff2);
    out.emplace_back(prefix + "b_ff2", layer.b_ff2);
    out.emplace_back(prefix + "ln2_gain", layer.ln2_gain);
    out.emplace_back(prefix + "ln2_offset", layer.ln2_offset);
  }
  return out;
}

EncoderParams EncoderParams::clone() const {
  EncoderParams copy;
  copy.config = config;
  copy.token_embedding = token_embedding.clone();
  copy.position_embedding = position_embedding.clone();
  for (const EncoderLayerParams& layer : layers) {
    EncoderLayerParams c;
    c.wq = layer.wq.clone();
    c.bq = layer.bq.clone();
    c.wk = layer.wk.clone();
    c.bk = layer.bk.clone();
    c.wv = layer.wv.clone();
    c.bv = layer.bv.clone();
    c.wo = layer.wo.clone();
    c.bo = layer.bo.clone();
    c.ln1_gain = layer.ln1_gain.clone();
    c.ln1_offset = layer.ln1_offset.clone();
    c.w_ff1 = layer.w_ff1.clone();
    c.b_ff1 = layer.b_ff1.clone();
    c.w_ff2 = layer.w_ff2.clone();
    c.b_ff2 = layer.b_ff2.clone();
    c.ln2_gain = layer.ln2_gain.clone();
    c.ln2_offset = layer.ln2_offset.clone();
    copy.layers.push_back(std::move(c));
  }
  return copy;
}

namespace {

Tensor self_attention(Tape& tape, const Tensor& h,
                      const EncoderLayerParams& layer, std::size_t n_heads) {
  const std::size_t d = h.cols();
  const std::size_t d_head = d / n_heads;
  const double scaling = 1.0 / std::sqrt(static_cast<double>(d_head));

  Tensor q = tape.add_rowvec(tape.matmul(h, layer.wq), layer.bq);
  Tensor k = tape.add_rowvec(tape.matmul(h, layer.wk), layer.bk);
  Tensor v = tape.add_rowvec(tape.matmul(h, layer.wv), layer.bv);

  std::vector<Tensor> heads;
  heads.reserve(n_heads);
  for (std::size_t head = 0; head < n_heads; ++head) {
    const std::size_t start = head * d_head;
    Tensor qh = tape.col_slice(q, start, d_head);
    Tensor kh = tape.col_slice(k, start, d_head);
    Tensor vh = tape.col_slice(v, start, d_head);
    Tensor scores = tape.scale(tape.matmul(qh, tape.transpose(kh)), scaling);
    Tensor weights = tape.softmax(scores, 1);
    heads.push_back(tape.matmul(weights, vh));
  }
  Tensor merged = n_heads == 1 ? heads.front() : tape.concat_cols(heads);
  return tape.add_rowvec(tape.matmul(merged, layer.wo), layer.bo);
}

}  // namespace

Tensor encode(Tape& tape, const EncoderParams& params, const TokenSequence& seq,
              bool train_mode, Rng* dropout_rng) {
  const EncoderConfig& cfg = params.config;
  if (seq.length == 0) {
    throw std::invalid_argument("encode: empty token sequence");
  }
  if (seq.length > cfg.max_len) {
    throw std::invalid_argument("encode: sequence length " +
                                std::to_string(seq.length) + " exceeds max_len " +
                                std::to_string(cfg.max_len));
  }
  if (seq.length > seq.ids.size()) {
    throw std::invalid_argument("encode: sequence length exceeds id buffer");
  }
  for (std::size_t i = seq.length; i < seq.ids.size(); ++i) {
    if (seq.ids[i] != Vocabulary::kPad) {
      throw std::invalid_argument("encode: non-pad id after sequence end");
    }
  }
  // Attention only ever sees the real tokens; the pad tail is dropped here.
  std::vector<std::size_t> ids(seq.ids.begin(), seq.ids.begin() + seq.length);
  std::vector<std::size_t> positions(seq.length);
  std::iota(positions.begin(), positions.end(), 0);

  const bool use_dropout =
      train_mode && cfg.dropout_rate > 0.0 && dropout_rng != nullptr;
  auto maybe_dropout = [&](Tensor t) {
    return use_dropout ? tape.dropout(t, cfg.dropout_rate, *dropout_rng) : t;
  };

  Tensor h = tape.add(tape.embedding_lookup(params.token_embedding, ids),
                      tape.row_gather(params.position_embedding, positions));
  h = maybe_dropout(h);
  for (const EncoderLayerParams& layer : params.layers) {
    Tensor attn = maybe_dropout(self_attention(tape, h, layer, cfg.n_heads));
    h = tape.layer_norm(tape.add(h, attn), layer.ln1_gain, layer.ln1_offset);
    Tensor ff = tape.matmul(
        tape.gelu(tape.add_rowvec(tape.matmul(h, layer.w_ff1), layer.b_ff1)),
        layer.w_ff2);
    ff = maybe_dropout(tape.add_rowvec(ff, layer.b_ff2));
    h = tape.layer_norm(tape.add(h, ff), layer.ln2_gain, layer.ln2_offset);
  }
  return h;
}

Tensor encode_class_names(Tape& tape, const EncoderParams& params,
                          const std::vector<std::string>& names,
                          const Vocabulary& vocab, bool train_mode,
                          Rng* dropout_rng) {
  if (names.size() < 2) {
    throw std::invalid_argument("encode_class_names: need at least 2 classes");
  }
  std::vector<Tensor> pooled;
  pooled.reserve(names.size());
  for (const std::string& name : names) {
    TokenSequence seq = make_sequence(vocab, name, params.config.max_len);
    if (seq.length == 0) {
      throw std::invalid_argument("encode_class_names: class name \"" + name +
                                  "\" has no tokens");
    }
    pooled.push_back(
        tape.mean_rows(encode(tape, params, seq, train_mode, dropout_rng)));
  }
  return tape.concat_rows(pooled);
}

}  // namespace hatesense
