#include <cmath>

#include "doctest.h"
#include "gradcheck_suite.hpp"
#include "hatesense/sense.hpp"

using namespace hatesense;

namespace {

// Independent cosine for the brute-force oracles.
double cosine_oracle(const std::vector<double>& u, const std::vector<double>& v) {
  double dot = 0, nu = 0, nv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  return dot / (std::max(std::sqrt(nu), 1e-12) * std::max(std::sqrt(nv), 1e-12));
}

std::vector<double> row_of(const Tensor& t, std::size_t i) {
  std::vector<double> row(t.cols());
  for (std::size_t j = 0; j < t.cols(); ++j) row[j] = t.at(i, j);
  return row;
}

}  // namespace

TEST_CASE("class set validation") {
  ClassSet ok{{"hate", "nothate"}, {true, false}};
  ok.validate();
  CHECK(ok.hateful_indices() == std::vector<std::size_t>{0});
  CHECK(ok.index_of("nothate") == 1);

  ClassSet all_hateful{{"a", "b"}, {true, true}};
  CHECK_THROWS_AS(all_hateful.validate(), std::invalid_argument);
  ClassSet one{{"a"}, {true}};
  CHECK_THROWS_AS(one.validate(), std::invalid_argument);
}

TEST_CASE("sense assignment picks the aligned class") {
  Tape tape;
  Tensor tokens = Tensor::from_data({1, 2}, {1.0, 0.0});
  Tensor classes = Tensor::from_data({2, 2}, {1.0, 0.0, 0.0, 1.0});
  SenseAssignment sa = assign_senses(tape, tokens, classes, 1.0);
  CHECK(sa.senses == std::vector<std::size_t>{0});
  CHECK(sa.distributions.at(0, 0) > sa.distributions.at(0, 1));
  const double row_sum = sa.distributions.at(0, 0) + sa.distributions.at(0, 1);
  CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("rescaling a token representation changes nothing") {
  Rng rng(17);
  Tensor tokens = fdcheck::random_tensor({3, 6}, rng);
  Tensor classes = fdcheck::random_tensor({3, 6}, rng);
  Tape tape;
  SenseAssignment base = assign_senses(tape, tokens, classes, 0.7);

  Tensor scaled = tokens.clone();
  for (std::size_t j = 0; j < 6; ++j) scaled.data()[1 * 6 + j] *= 3.0;
  SenseAssignment after = assign_senses(tape, scaled, classes, 0.7);
  CHECK(base.senses == after.senses);
  for (std::size_t i = 0; i < base.distributions.size(); ++i)
    CHECK(base.distributions.at(i) ==
          doctest::Approx(after.distributions.at(i)).epsilon(1e-12));
}

TEST_CASE("senses equal brute-force cosine argmax and softmax argmax") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    Rng rng(seed);
    Tensor tokens = fdcheck::random_tensor({4, 5}, rng);
    Tensor classes = fdcheck::random_tensor({3, 5}, rng);
    Tape tape;
    SenseAssignment sa = assign_senses(tape, tokens, classes, 1.3);
    for (std::size_t i = 0; i < 4; ++i) {
      std::size_t best = 0;
      double best_cos = -2.0;
      for (std::size_t j = 0; j < 3; ++j) {
        const double c = cosine_oracle(row_of(tokens, i), row_of(classes, j));
        if (c > best_cos) {
          best_cos = c;
          best = j;
        }
      }
      CHECK(sa.senses[i] == best);  // argmax of softmax == argmax of cosine
    }
  }
}

TEST_CASE("augment adds the selected class vector") {
  Tape tape;
  Rng rng(5);
  Tensor tokens = fdcheck::random_tensor({2, 4}, rng);
  Tensor zeros = Tensor::zeros({2, 4});
  SenseAssignment sa;
  sa.senses = {1, 0};
  sa.distributions = Tensor::zeros({2, 2});
  Tensor same = augment(tape, tokens, zeros, sa);
  CHECK(same.data() == tokens.data());

  Tensor classes = fdcheck::random_tensor({3, 4}, rng);
  SenseAssignment pick2;
  pick2.senses = {2};
  pick2.distributions = Tensor::zeros({1, 3});
  Tensor one = Tensor::from_data({1, 4}, {1, 2, 3, 4});
  Tensor out = augment(tape, one, classes, pick2);
  for (std::size_t j = 0; j < 4; ++j)
    CHECK(out.at(0, j) == one.at(0, j) + classes.at(2, j));
}

TEST_CASE("augment routes gradients to selected class rows by count") {
  Rng rng(23);
  Tensor tokens = fdcheck::random_tensor({5, 3}, rng);
  Tensor classes = fdcheck::random_tensor({3, 3}, rng);
  SenseAssignment sa;
  sa.senses = {2, 0, 2, 2, 0};  // counts: class0 x2, class1 x0, class2 x3
  sa.distributions = Tensor::zeros({5, 3});
  Tape tape;
  tape.backward(tape.sum(augment(tape, tokens, classes, sa)));
  const auto& g = classes.grad();
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(g[0 * 3 + j] == 2.0);
    CHECK(g[1 * 3 + j] == 0.0);
    CHECK(g[2 * 3 + j] == 3.0);
  }
  for (double v : tokens.grad()) CHECK(v == 1.0);
}

TEST_CASE("classify pools a single row unchanged and ignores duplicates") {
  Rng rng(31);
  ClassifierHeadParams head = ClassifierHeadParams::init(4, 4, 2, rng);
  Tape tape;
  Tensor one = fdcheck::random_tensor({1, 4}, rng);
  Tensor logits_one = classify(tape, one, head);

  Tensor doubled = tape.concat_rows({one, one});
  Tensor logits_two = classify(tape, doubled, head);
  CHECK(logits_one.data() == logits_two.data());
}

TEST_CASE("classifier head matches a hand-computed 2-layer MLP") {
  ClassifierHeadParams head;
  head.w1 = Tensor::from_data({2, 2}, {0.5, -1.0, 2.0, 0.25}, true);
  head.b1 = Tensor::from_data({1, 2}, {0.1, -0.2}, true);
  head.w2 = Tensor::from_data({2, 2}, {1.0, 0.5, -0.5, 2.0}, true);
  head.b2 = Tensor::from_data({1, 2}, {0.0, 0.3}, true);
  Tensor input = Tensor::from_data({2, 2}, {0.6, -0.4, 0.2, 0.9});

  // Hand computation: max-pool, then gelu(x W1 + b1) W2 + b2.
  const double p0 = 0.6, p1 = 0.9;
  auto gelu_ref = [](double x) {
    return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
  };
  const double h0 = gelu_ref(p0 * 0.5 + p1 * 2.0 + 0.1);
  const double h1 = gelu_ref(p0 * -1.0 + p1 * 0.25 - 0.2);
  const double l0 = h0 * 1.0 + h1 * -0.5 + 0.0;
  const double l1 = h0 * 0.5 + h1 * 2.0 + 0.3;

  Tape tape;
  Tensor logits = classify(tape, input, head);
  CHECK(logits.at(0) == doctest::Approx(l0).epsilon(1e-12));
  CHECK(logits.at(1) == doctest::Approx(l1).epsilon(1e-12));
}

TEST_CASE("forward is deterministic and ties break to the lowest class") {
  Vocabulary vocab = Vocabulary::from_tokens(
      {"<pad>", "<unk>", "same", "aa", "bb", "cc"});
  ModelConfig config;
  config.encoder.vocab_size = vocab.size();
  config.encoder.d_model = 8;
  config.encoder.n_heads = 2;
  config.encoder.n_layers = 1;
  config.encoder.d_ff = 16;
  config.encoder.max_len = 8;
  config.encoder.seed = 2;
  ClassSet classes{{"same", "same"}, {true, false}};

  ModelParams params = ModelParams::init(config, 2);
  TokenSequence seq;
  seq.ids = {3, 4, 5};
  seq.length = 3;
  Tape tape;
  tape.set_recording(false);
  Prediction a = forward(tape, params, config, classes, vocab, seq);
  Prediction b = forward(tape, params, config, classes, vocab, seq);
  CHECK(a.logits.data() == b.logits.data());
  CHECK(a.predicted == b.predicted);
  CHECK(a.assignment.senses == b.assignment.senses);
  // Identical class names give identical representations, so every sense
  // tie-breaks to class 0.
  for (std::size_t s : a.assignment.senses) CHECK(s == 0);
}

TEST_CASE("argmax is invariant to adding a constant to all logits") {
  Tensor logits = Tensor::from_data({1, 3}, {0.2, 0.9, -0.4});
  Tensor shifted = Tensor::from_data({1, 3}, {100.2, 100.9, 99.6});
  CHECK(argmax_lowest(logits) == argmax_lowest(shifted));
  Tensor tie = Tensor::from_data({1, 3}, {0.9, 0.9, 0.1});
  CHECK(argmax_lowest(tie) == 0);
}

TEST_CASE("disabling augmentation reduces the model to encode-pool-MLP") {
  Vocabulary vocab = Vocabulary::from_tokens(
      {"<pad>", "<unk>", "hate", "nothate", "aa", "bb"});
  ModelConfig config;
  config.encoder.vocab_size = vocab.size();
  config.encoder.d_model = 8;
  config.encoder.n_heads = 2;
  config.encoder.n_layers = 1;
  config.encoder.d_ff = 16;
  config.encoder.max_len = 8;
  config.encoder.seed = 4;
  config.sense_augmentation = false;
  ClassSet classes{{"hate", "nothate"}, {true, false}};
  ModelParams params = ModelParams::init(config, 2);

  TokenSequence seq;
  seq.ids = {4, 5, 4};
  seq.length = 3;
  Tape tape;
  tape.set_recording(false);
  Prediction pred = forward(tape, params, config, classes, vocab, seq);
  CHECK_FALSE(pred.has_senses);

  Tensor plain = classify(tape, encode(tape, params.encoder, seq), params.head);
  CHECK(pred.logits.data() == plain.data());
}

TEST_CASE("end-to-end gradients match finite differences") {
  std::size_t checked = 0;
  for (std::uint64_t seed = 1; seed <= 6 && checked < 3; ++seed) {
    const auto outcome = fdcheck::full_model_fd_error(seed);
    if (!outcome.checked) continue;
    ++checked;
    INFO("seed ", seed);
    CHECK(outcome.max_rel_error < 1e-4);
  }
  CHECK(checked >= 3);
}

TEST_CASE("soft augmentation mixes class vectors by the distribution") {
  Tape tape;
  Tensor tokens = Tensor::from_data({1, 2}, {1.0, 1.0});
  Tensor classes = Tensor::from_data({2, 2}, {1.0, 0.0, 0.0, 1.0});
  SenseAssignment sa;
  sa.senses = {0};
  sa.distributions = Tensor::from_data({1, 2}, {0.75, 0.25});
  Tensor out = augment_soft(tape, tokens, classes, sa);
  CHECK(out.at(0, 0) == doctest::Approx(1.75));
  CHECK(out.at(0, 1) == doctest::Approx(1.25));
}
