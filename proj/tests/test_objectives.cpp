#include <cmath>
#include <set>

#include "doctest.h"
#include "gradcheck_suite.hpp"
#include "hatesense/objectives.hpp"

using namespace hatesense;

namespace {

const std::vector<bool> kMask2{true, false};          // {hate, nothate}
const std::vector<bool> kMask4{true, true, false, false};

Tensor one_hot_rows(const std::vector<std::size_t>& senses, std::size_t k) {
  Tensor t = Tensor::zeros({senses.size(), k});
  for (std::size_t i = 0; i < senses.size(); ++i)
    t.data()[i * k + senses[i]] = 1.0;
  return t;
}

}  // namespace

TEST_CASE("consensus_hard selects the most frequent hateful sense") {
  CHECK(consensus_hard({0, 0, 1}, kMask2) == 0);
  CHECK(consensus_hard({1, 1, 1}, kMask2) == 1);  // fallback: lowest benign
  CHECK(consensus_hard({0, 1, 1, 0}, kMask4) == 0);  // tie -> lowest index
  CHECK(consensus_hard({1, 1, 0, 2}, kMask4) == 1);
  CHECK(consensus_hard({2, 3, 3}, kMask4) == 2);  // no hateful occurrence
  CHECK_THROWS_AS(consensus_hard({}, kMask2), std::invalid_argument);
}

TEST_CASE("unique_hard counts distinct hateful senses") {
  CHECK(unique_hard({0, 0, 1, 2}, kMask4) == 2);
  CHECK(unique_hard({2, 3, 2}, kMask4) == 0);
  CHECK(unique_hard({0, 0, 0}, kMask2) == 1);
}

TEST_CASE("hard selectors match brute-force set oracles on random lists") {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(12);
    std::vector<std::size_t> senses(n);
    for (std::size_t& s : senses) s = rng.uniform_index(4);

    // Set-construction oracle for the unique count.
    std::set<std::size_t> unique_set;
    for (std::size_t s : senses)
      if (kMask4[s]) unique_set.insert(s);
    CHECK(unique_hard(senses, kMask4) == unique_set.size());

    // Counting oracle for the consensus.
    std::size_t counts[4] = {0, 0, 0, 0};
    for (std::size_t s : senses) ++counts[s];
    std::size_t expected = 4;
    for (std::size_t j = 0; j < 4; ++j) {
      if (!kMask4[j] || counts[j] == 0) continue;
      if (expected == 4 || counts[j] > counts[expected]) expected = j;
    }
    if (expected == 4) expected = 2;  // lowest non-hateful
    CHECK(consensus_hard(senses, kMask4) == expected);
  }
}

TEST_CASE("consensus_loss is zero exactly when all tokens agree with y") {
  Tape tape;
  Tensor agree = one_hot_rows({1, 1, 1}, 2);
  CHECK(consensus_loss(tape, agree, 1).value() == doctest::Approx(0.0));

  Tensor uniform = Tensor::full({3, 2}, 0.5);
  CHECK(consensus_loss(tape, uniform, 0).value() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Tensor off = one_hot_rows({1, 0, 1}, 2);
  CHECK(consensus_loss(tape, off, 1).value() > 0.0);
}

TEST_CASE("consensus_loss equals -log of the averaged distribution at y") {
  Rng rng(7);
  Tensor raw = fdcheck::random_tensor({3, 3}, rng);
  Tape tape;
  Tensor dist = tape.softmax(raw, 1);
  const std::size_t y = 2;
  double mean_y = (dist.at(0, y) + dist.at(1, y) + dist.at(2, y)) / 3.0;
  CHECK(consensus_loss(tape, dist, y).value() ==
        doctest::Approx(-std::log(mean_y)).epsilon(1e-12));
}

TEST_CASE("unique_loss equals the hard count on one-hot rows") {
  Tape tape;
  CHECK(unique_loss(tape, one_hot_rows({0, 0, 0}, 2), kMask2).value() == 1.0);
  CHECK(unique_loss(tape, one_hot_rows({1, 1}, 2), kMask2).value() == 0.0);
  CHECK(unique_loss(tape, one_hot_rows({0, 1, 2}, 4), kMask4).value() == 2.0);

  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(8);
    std::vector<std::size_t> senses(n);
    for (std::size_t& s : senses) s = rng.uniform_index(4);
    Tensor rows = one_hot_rows(senses, 4);
    CHECK(unique_loss(tape, rows, kMask4).value() ==
          static_cast<double>(unique_hard(senses, kMask4)));
  }
}

TEST_CASE("unique_loss is monotone in a hateful class maximum") {
  Tape tape;
  Tensor dist = Tensor::from_data({2, 2}, {0.6, 0.4, 0.3, 0.7});
  const double before = unique_loss(tape, dist, kMask2).value();
  Tensor bumped = Tensor::from_data({2, 2}, {0.8, 0.2, 0.3, 0.7});
  const double after = unique_loss(tape, bumped, kMask2).value();
  CHECK(after >= before);
}

TEST_CASE("plurality one-hot instances: averaged argmax equals consensus_hard") {
  // A hateful class with a strict plurality dominates the token average.
  for (const auto& senses : {std::vector<std::size_t>{0, 0, 1, 2},
                             std::vector<std::size_t>{1, 1, 1, 0, 2},
                             std::vector<std::size_t>{0, 0, 0}}) {
    Tensor rows = one_hot_rows(senses, 4);
    Tape tape;
    Tensor averaged = tape.mean_rows(rows);
    std::size_t argmax = 0;
    for (std::size_t j = 1; j < 4; ++j)
      if (averaged.at(j) > averaged.at(argmax)) argmax = j;
    CHECK(argmax == consensus_hard(senses, kMask4));
  }
}

TEST_CASE("relaxation gradients match finite differences") {
  Rng rng(21);
  Tensor raw = fdcheck::random_tensor({4, 3}, rng);
  const std::vector<bool> mask{true, false, true};

  {
    Tape tape;
    Tensor loss = consensus_loss(tape, tape.softmax(raw, 1), 1);
    tape.backward(loss);
    auto value = [&]() {
      Tape fresh;
      fresh.set_recording(false);
      return consensus_loss(fresh, fresh.softmax(raw, 1), 1).value();
    };
    CHECK(fdcheck::compare_to_fd({raw}, value).max_rel_error < 1e-4);
  }
  raw.zero_grad();
  {
    Tape tape;
    Tensor loss = unique_loss(tape, tape.softmax(raw, 1), mask);
    tape.backward(loss);
    auto value = [&]() {
      Tape fresh;
      fresh.set_recording(false);
      return unique_loss(fresh, fresh.softmax(raw, 1), mask).value();
    };
    CHECK(fdcheck::compare_to_fd({raw}, value).max_rel_error < 1e-4);
  }
}

TEST_CASE("total_loss composes the weighted terms") {
  Rng rng(3);
  Prediction pred;
  pred.logits = Tensor::from_data({1, 2}, {0.4, -0.3});
  pred.has_senses = true;
  Tape tape;
  pred.assignment.distributions = tape.softmax(fdcheck::random_tensor({3, 2}, rng), 1);
  pred.assignment.senses = {0, 1, 0};

  LossWeights cls_only{1.0, 0.0, 0.0};
  TotalLoss only = total_loss(tape, pred, 0, kMask2, cls_only);
  CHECK(only.total.value() == doctest::Approx(only.breakdown.cls));
  CHECK(only.breakdown.consensus == 0.0);
  CHECK(only.breakdown.unique == 0.0);

  LossWeights all{1.0, 1.0, 1.0};
  TotalLoss combined = total_loss(tape, pred, 0, kMask2, all);
  const double expected_cls =
      tape.cross_entropy_with_logits(pred.logits, 0).value();
  const double expected_consensus =
      consensus_loss(tape, pred.assignment.distributions, 0).value();
  const double expected_unique =
      unique_loss(tape, pred.assignment.distributions, kMask2).value();
  CHECK(combined.breakdown.total ==
        doctest::Approx(expected_cls + expected_consensus + expected_unique)
            .epsilon(1e-12));
  CHECK(combined.total.value() ==
        doctest::Approx(combined.breakdown.total).epsilon(1e-10));
  CHECK(combined.total.value() >= 0.0);
  CHECK(std::abs(combined.breakdown.total -
                 (all.cls * combined.breakdown.cls +
                  all.consensus * combined.breakdown.consensus +
                  all.unique * combined.breakdown.unique)) <= 1e-10);
}

TEST_CASE("loss weights validation") {
  LossWeights bad{0.0, 0.5, 0.1};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  LossWeights negative{1.0, -0.1, 0.0};
  CHECK_THROWS_AS(negative.validate(), std::invalid_argument);
}
