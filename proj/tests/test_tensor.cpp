#include <cmath>

#include "doctest.h"
#include "gradcheck_suite.hpp"
#include "hatesense/rng.hpp"
#include "hatesense/tensor.hpp"

using namespace hatesense;

TEST_CASE("matmul identity and zero propagation") {
  Tape tape;
  Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor m = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor out = tape.matmul(eye, m);
  CHECK(out.data() == std::vector<double>{1, 2, 3, 4});

  Tensor a = Tensor::from_data({2, 2}, {1, 0, 0, 0});
  Tensor b = Tensor::from_data({2, 1}, {0, 5});
  Tensor zero = tape.matmul(a, b);
  CHECK(zero.data() == std::vector<double>{0, 0});
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tape tape;
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({2, 3});
  CHECK_THROWS_WITH_AS(tape.matmul(a, b),
                       doctest::Contains("[2x3]"), std::invalid_argument);
}

TEST_CASE("matmul gradient of sum matches finite differences tightly") {
  Rng rng(7);
  Tensor a = fdcheck::random_tensor({3, 4}, rng);
  Tensor b = fdcheck::random_tensor({4, 2}, rng);
  Tape tape;
  Tensor loss = tape.sum(tape.matmul(a, b));
  tape.backward(loss);
  auto value = [&]() {
    Tape fresh;
    fresh.set_recording(false);
    return fresh.sum(fresh.matmul(a, b)).value();
  };
  const auto result = fdcheck::compare_to_fd({a, b}, value);
  CHECK(result.max_rel_error < 1e-6);
  CHECK(result.checked == 20);
}

TEST_CASE("softmax symmetry and shift stability") {
  Tape tape;
  Tensor x = Tensor::from_data({2}, {0, 0});
  Tensor y = tape.softmax(x, 0);
  CHECK(y.at(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(y.at(1) == doctest::Approx(0.5).epsilon(1e-12));

  Tensor big = Tensor::from_data({2}, {1000, 1000});
  Tensor yb = tape.softmax(big, 0);
  CHECK(yb.at(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::isfinite(yb.at(0)));
}

TEST_CASE("softmax [1,2,3] matches a high-precision reference") {
  // Independent evaluation in long double.
  long double e1 = expl(1.0L), e2 = expl(2.0L), e3 = expl(3.0L);
  long double total = e1 + e2 + e3;
  Tape tape;
  Tensor y = tape.softmax(Tensor::from_data({3}, {1, 2, 3}), 0);
  CHECK(y.at(0) == doctest::Approx(static_cast<double>(e1 / total)).epsilon(1e-12));
  CHECK(y.at(1) == doctest::Approx(static_cast<double>(e2 / total)).epsilon(1e-12));
  CHECK(y.at(2) == doctest::Approx(static_cast<double>(e3 / total)).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one and are shift invariant") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    Tensor x = fdcheck::random_tensor({3, 5}, rng, 2.0);
    Tape tape;
    Tensor y = tape.softmax(x, 1);
    for (std::size_t i = 0; i < 3; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < 5; ++j) {
        total += y.at(i, j);
        CHECK(y.at(i, j) > 0.0);
      }
      CHECK(std::abs(total - 1.0) <= 1e-12);
    }
    Tensor shifted = x.clone();
    const double shift = rng.normal(0.0, 10.0);
    for (double& v : shifted.data()) v += shift;
    Tensor ys = tape.softmax(shifted, 1);
    for (std::size_t i = 0; i < y.size(); ++i)
      CHECK(y.at(i) == doctest::Approx(ys.at(i)).epsilon(1e-9));
  }
}

TEST_CASE("cosine similarity basics") {
  Tape tape;
  Tensor u = Tensor::from_data({2}, {3, 4});
  CHECK(tape.cosine_similarity(u, u).value() == doctest::Approx(1.0));

  Tensor e1 = Tensor::from_data({2}, {1, 0});
  Tensor e2 = Tensor::from_data({2}, {0, 1});
  CHECK(tape.cosine_similarity(e1, e2).value() == doctest::Approx(0.0));

  // Direct formula: dot = 4, |u| = 3, |v| = sqrt(5).
  Tensor a = Tensor::from_data({3}, {1, 2, 2});
  Tensor b = Tensor::from_data({3}, {2, 0, 1});
  CHECK(tape.cosine_similarity(a, b).value() ==
        doctest::Approx(4.0 / (3.0 * std::sqrt(5.0))).epsilon(1e-12));
}

TEST_CASE("cosine similarity of two zero vectors is 0 by the norm floor") {
  Tape tape;
  Tensor z = Tensor::zeros({3});
  CHECK(tape.cosine_similarity(z, z).value() == 0.0);
}

TEST_CASE("cosine similarity is invariant to positive rescaling") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    Tensor u = fdcheck::random_tensor({6}, rng);
    Tensor v = fdcheck::random_tensor({6}, rng);
    Tape tape;
    const double base = tape.cosine_similarity(u, v).value();
    CHECK(base <= 1.0 + 1e-9);
    CHECK(base >= -1.0 - 1e-9);
    for (double alpha : {0.5, 3.0, 1e-3, 1e4}) {
      Tensor scaled = u.clone();
      for (double& x : scaled.data()) x *= alpha;
      CHECK(std::abs(tape.cosine_similarity(scaled, v).value() - base) <= 1e-12);
    }
  }
}

TEST_CASE("max pool over time returns values and argmax indices") {
  Tape tape;
  Tensor x = Tensor::from_data({2, 2}, {1, 5, 3, 2});
  MaxPoolResult pooled = tape.max_pool_over_time(x);
  CHECK(pooled.values.data() == std::vector<double>{3, 5});
  CHECK(pooled.argmax == std::vector<std::size_t>{1, 0});
}

TEST_CASE("l1 norm") {
  Tape tape;
  CHECK(tape.l1_norm(Tensor::from_data({3}, {-1, 2, 0})).value() == 3.0);
}

TEST_CASE("backward on linear and quadratic cases") {
  {
    Tape tape;
    Tensor x = Tensor::from_data({3}, {5, -1, 2}, true);
    tape.backward(tape.sum(x));
    CHECK(x.grad() == std::vector<double>{1, 1, 1});
  }
  {
    Tape tape;
    Tensor x = Tensor::from_data({3}, {1, 2, 3}, true);
    tape.backward(tape.sum(tape.mul(x, x)));
    CHECK(x.grad() == std::vector<double>{2, 4, 6});
  }
}

TEST_CASE("backward errors: repeated call, non-scalar, detached") {
  Tape tape;
  Tensor x = Tensor::from_data({2}, {1, 2}, true);
  Tensor loss = tape.sum(x);
  tape.backward(loss);
  CHECK_THROWS_AS(tape.backward(loss), std::logic_error);

  Tape tape2;
  Tensor y = tape2.mul(x, x);
  CHECK_THROWS_AS(tape2.backward(y), std::invalid_argument);

  Tape off;
  off.set_recording(false);
  Tensor detached = off.sum(Tensor::from_data({2}, {1, 2}, false));
  CHECK_THROWS_AS(off.backward(detached), std::invalid_argument);
}

TEST_CASE("reset re-arms the tape") {
  Tape tape;
  Tensor x = Tensor::from_data({2}, {1, 2}, true);
  tape.backward(tape.sum(x));
  tape.reset();
  x.zero_grad();
  tape.backward(tape.sum(tape.mul(x, x)));
  CHECK(x.grad() == std::vector<double>{2, 4});
}

TEST_CASE("every primitive passes finite-difference checks over 20 seeds") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    for (const auto& [name, err] : fdcheck::primitive_fd_errors(seed)) {
      INFO("primitive ", name, " seed ", seed);
      CHECK(err < 1e-4);
    }
  }
}

TEST_CASE("layer_norm gradient matches finite differences below 1e-5") {
  Rng rng(11);
  Tensor x = fdcheck::random_tensor({3, 6}, rng);
  Tensor gain = fdcheck::random_tensor({1, 6}, rng, 0.3);
  for (double& v : gain.data()) v += 1.0;
  Tensor offset = fdcheck::random_tensor({1, 6}, rng, 0.3);
  Tensor w = fdcheck::random_tensor({3, 6}, rng);
  Tape tape;
  Tensor loss = tape.sum(tape.mul(tape.layer_norm(x, gain, offset), w));
  tape.backward(loss);
  auto value = [&]() {
    Tape fresh;
    fresh.set_recording(false);
    return fresh.sum(fresh.mul(fresh.layer_norm(x, gain, offset), w)).value();
  };
  CHECK(fdcheck::compare_to_fd({x, gain, offset}, value).max_rel_error < 1e-5);
}

TEST_CASE("replaying an identical graph is bitwise identical") {
  auto build = [](std::vector<double>* out_y, std::vector<double>* out_g) {
    Rng rng(42);
    Tensor a = fdcheck::random_tensor({3, 4}, rng);
    Tensor b = fdcheck::random_tensor({4, 3}, rng);
    Tape tape;
    Tensor y = tape.softmax(tape.matmul(a, b), 1);
    Tensor loss = tape.sum(tape.mul(y, y));
    tape.backward(loss);
    *out_y = y.data();
    *out_g = a.grad();
  };
  std::vector<double> y1, g1, y2, g2;
  build(&y1, &g1);
  build(&y2, &g2);
  CHECK(y1 == y2);
  CHECK(g1 == g2);
}

TEST_CASE("non-finite detection") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0});
  CHECK(x.all_finite());
  x.data()[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(x.all_finite());
}

TEST_CASE("dropout scales kept entries and is identity at rate 0") {
  Rng rng(3);
  Tensor x = Tensor::full({4, 4}, 1.0);
  Tape tape;
  Tensor same = tape.dropout(x, 0.0, rng);
  CHECK(same.same_storage(x));
  Tensor dropped = tape.dropout(x, 0.5, rng);
  for (double v : dropped.data()) {
    CHECK((v == 0.0 || v == doctest::Approx(2.0)));
  }
}
