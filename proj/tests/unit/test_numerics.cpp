#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "test_support.hpp"
#include "vhd/gradcheck.hpp"
#include "vhd/ops.hpp"
#include "vhd/tape.hpp"
#include "vhd/tensor.hpp"

using namespace vhd;
using test_support::check_op_gradient;
using test_support::matmul_oracle;
using test_support::max_abs_diff;

TEST_SUITE_BEGIN("numerics");

TEST_CASE("tensor shape invariants") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5, 0.0)), ShapeError);
  CHECK_THROWS_AS(Tensor({0, 3}, {}), ShapeError);
  CHECK_THROWS_AS(Tensor({-1}, {1.0}), ShapeError);
  const Tensor t = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t(1, 2) == 6.0);
}

TEST_CASE("matmul identity and forced arithmetic") {
  Tape tape;
  const Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  const Tensor m = Tensor::matrix(2, 2, {1, 2, 3, 4});
  const Tensor r = matmul(tape, eye, m);
  CHECK(r.data() == m.data());

  const Tensor a = Tensor::matrix(1, 2, {1, 2});
  const Tensor b = Tensor::matrix(2, 1, {3, 4});
  CHECK(matmul(tape, a, b).value() == 11.0);

  CHECK_THROWS_AS(matmul(tape, a, a), ShapeError);
}

TEST_CASE("matmul matches triple-loop oracle") {
  Rng rng(7);
  Tape tape;
  const Tensor a = Tensor::rand_uniform({3, 4}, rng, -2.0, 2.0);
  const Tensor b = Tensor::rand_uniform({4, 2}, rng, -2.0, 2.0);
  CHECK(max_abs_diff(matmul(tape, a, b), matmul_oracle(a, b)) <= 1e-12);
}

TEST_CASE("matmul associativity on random conformant triples") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Tape tape;
    const Tensor a = Tensor::rand_uniform({3, 5}, rng, -1.0, 1.0);
    const Tensor b = Tensor::rand_uniform({5, 4}, rng, -1.0, 1.0);
    const Tensor c = Tensor::rand_uniform({4, 2}, rng, -1.0, 1.0);
    const Tensor left = matmul(tape, matmul(tape, a, b), c);
    const Tensor right = matmul(tape, a, matmul(tape, b, c));
    CHECK(max_abs_diff(left, right) <= 1e-9);
  }
}

TEST_CASE("matmul_nt equals matmul with explicit transpose") {
  Rng rng(13);
  Tape tape;
  const Tensor a = Tensor::rand_uniform({4, 3}, rng, -1.0, 1.0);
  const Tensor b = Tensor::rand_uniform({5, 3}, rng, -1.0, 1.0);
  const Tensor viaT = matmul(tape, a, transpose(tape, b));
  CHECK(max_abs_diff(matmul_nt(tape, a, b), viaT) == 0.0);
}

TEST_CASE("softmax rows: symmetry, shift invariance, oracle") {
  Tape tape;
  const Tensor sym = softmax_rows(tape, Tensor::matrix(1, 2, {0, 0}));
  CHECK(sym(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(sym(0, 1) == doctest::Approx(0.5).epsilon(1e-15));

  const Tensor big = softmax_rows(tape, Tensor::matrix(1, 3, {1000, 1000, 1000}));
  for (int j = 0; j < 3; ++j) CHECK(big(0, j) == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(all_finite(big));

  // frozen values from the long-double exp/sum oracle below
  const Tensor probs = softmax_rows(tape, Tensor::matrix(1, 3, {1, 2, 3}));
  CHECK(std::abs(probs(0, 0) - 0.09003) <= 1e-5);
  CHECK(std::abs(probs(0, 1) - 0.24473) <= 1e-5);
  CHECK(std::abs(probs(0, 2) - 0.66524) <= 1e-5);

  long double es[3], sum = 0.0L;
  const double row[3] = {1, 2, 3};
  for (int j = 0; j < 3; ++j) {
    es[j] = std::exp(static_cast<long double>(row[j]));
    sum += es[j];
  }
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(probs(0, j) - static_cast<double>(es[j] / sum)) <= 1e-5);
  }

  Rng rng(3);
  const Tensor m = Tensor::rand_uniform({4, 6}, rng, -3.0, 3.0);
  const Tensor base = softmax_rows(tape, m);
  const Tensor shifted = softmax_rows(tape, affine(tape, m, 1.0, 17.25));
  CHECK(max_abs_diff(base, shifted) <= 1e-12);
  for (int i = 0; i < 4; ++i) {
    double s = 0.0;
    for (int j = 0; j < 6; ++j) {
      CHECK(base(i, j) >= 0.0);
      s += base(i, j);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("layer_norm: degenerate rows and two-pass oracle") {
  Tape tape;
  const Tensor g1 = Tensor::vec({1, 1, 1});
  const Tensor b0 = Tensor::vec({0, 0, 0});
  const Tensor constant = layer_norm(tape, Tensor::matrix(1, 3, {5, 5, 5}), g1, b0);
  for (int j = 0; j < 3; ++j) CHECK(constant(0, j) == 0.0);

  const Tensor two = layer_norm(tape, Tensor::matrix(1, 2, {1, 3}), Tensor::vec({1, 1}),
                                Tensor::vec({0, 0}), 1e-12);
  CHECK(two(0, 0) == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(two(0, 1) == doctest::Approx(1.0).epsilon(1e-9));

  CHECK_THROWS_AS(layer_norm(tape, two, Tensor::vec({1, 1}), Tensor::vec({0, 0}), 0.0),
                  ContractError);

  Rng rng(5);
  const int c = 8;
  const Tensor m = Tensor::rand_uniform({3, c}, rng, -4.0, 4.0);
  const Tensor gamma = Tensor::rand_uniform({c}, rng, 0.5, 1.5);
  const Tensor beta = Tensor::rand_uniform({c}, rng, -0.5, 0.5);
  const double eps = 1e-5;
  const Tensor out = layer_norm(tape, m, gamma, beta, eps);
  for (int i = 0; i < 3; ++i) {
    double mean = 0.0;
    for (int j = 0; j < c; ++j) mean += m(i, j);
    mean /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) var += (m(i, j) - mean) * (m(i, j) - mean);
    var /= c;
    for (int j = 0; j < c; ++j) {
      const double want = gamma(j) * (m(i, j) - mean) / std::sqrt(var + eps) + beta(j);
      CHECK(std::abs(out(i, j) - want) <= 1e-10);
    }
  }
}

TEST_CASE("l2_normalize_rows: 3-4-5 row, zero row, unit norms") {
  Tape tape;
  const Tensor t = l2_normalize_rows(tape, Tensor::matrix(2, 2, {3, 4, 0, 0}));
  CHECK(t(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(t(0, 1) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(t(1, 0) == 0.0);
  CHECK(t(1, 1) == 0.0);

  Rng rng(9);
  const Tensor m = Tensor::rand_uniform({5, 7}, rng, -2.0, 2.0);
  const Tensor n = l2_normalize_rows(tape, m);
  for (int i = 0; i < 5; ++i) {
    double ss = 0.0;
    for (int j = 0; j < 7; ++j) ss += n(i, j) * n(i, j);
    CHECK(std::abs(std::sqrt(ss) - 1.0) <= 1e-12);
  }
}

TEST_CASE("seeded_dropout: identity modes, keep rate, reproducibility") {
  Tape tape;
  Rng rng(21);
  const Tensor m = Tensor::rand_uniform({10, 10}, rng, 0.5, 1.5);
  const Tensor same_p0 = seeded_dropout(tape, m, 0.0, Rng(1), true);
  CHECK(same_p0.data() == m.data());
  const Tensor same_eval = seeded_dropout(tape, m, 0.9, Rng(1), false);
  CHECK(same_eval.data() == m.data());
  CHECK_THROWS_AS(seeded_dropout(tape, m, 1.0, Rng(1), true), ConfigError);
  CHECK_THROWS_AS(seeded_dropout(tape, m, -0.1, Rng(1), true), ConfigError);

  const Tensor wide = Tensor::matrix(1000, 100, std::vector<double>(100000, 1.0));
  const Tensor dropped = seeded_dropout(tape, wide, 0.5, Rng(42), true);
  std::size_t kept = 0;
  for (double x : dropped.data()) {
    if (x != 0.0) {
      ++kept;
      CHECK(x == doctest::Approx(2.0));
    }
  }
  const double keep_rate = static_cast<double>(kept) / 100000.0;
  CHECK(std::abs(keep_rate - 0.5) <= 0.01);

  const Tensor again = seeded_dropout(tape, wide, 0.5, Rng(42), true);
  CHECK(std::memcmp(again.data().data(), dropped.data().data(), sizeof(double) * 100000) == 0);
}

TEST_CASE("backward: sum and product rule") {
  {
    Tape tape;
    const Tensor w = tape.watch(Tensor::matrix(2, 2, {1, 2, 3, 4}));
    const Tensor loss = sum_all(tape, w);
    tape.backward(loss);
    const Tensor g = tape.grad(w);
    for (double x : g.data()) CHECK(x == 1.0);
  }
  {
    Tape tape;
    const Tensor x = tape.watch(Tensor::scalar(2.0));
    const Tensor y = tape.watch(Tensor::scalar(3.0));
    const Tensor loss = mul(tape, x, y);
    tape.backward(loss);
    CHECK(tape.grad(x).value() == 3.0);
    CHECK(tape.grad(y).value() == 2.0);
  }
  {
    Tape tape;
    const Tensor w = tape.watch(Tensor::matrix(2, 2, {1, 2, 3, 4}));
    CHECK_THROWS_AS(tape.backward(w), ContractError);
  }
}

TEST_CASE("backward accumulates across reuse of a node") {
  Tape tape;
  const Tensor x = tape.watch(Tensor::scalar(3.0));
  const Tensor y = mul(tape, x, x);  // x^2, dx = 2x = 6
  tape.backward(y);
  CHECK(tape.grad(x).value() == 6.0);
}

TEST_CASE("finite_diff_check on theta squared") {
  ParamMap params{{"theta", Tensor::scalar(3.0)}};
  ScalarFn f = [](Tape& tape, const ParamMap& p) {
    const Tensor& t = p.at("theta");
    return mul(tape, t, t);
  };
  FiniteDiffOptions opt;
  opt.tol = 1e-8;
  const FiniteDiffReport rep = finite_diff_check(f, params, opt);
  CHECK(rep.pass);
  CHECK(rep.groups.size() == 1);
  CHECK(rep.groups[0].worst_analytic == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(rep.groups[0].worst_numeric == doctest::Approx(6.0).epsilon(1e-8));
}

TEST_CASE("finite_diff_check rejects non-deterministic objectives") {
  ParamMap params{{"theta", Tensor::scalar(1.0)}};
  int calls = 0;
  ScalarFn f = [&calls](Tape& tape, const ParamMap& p) {
    ++calls;
    return affine(tape, p.at("theta"), 1.0, calls * 0.1);
  };
  FiniteDiffOptions opt;
  CHECK_THROWS_AS(finite_diff_check(f, params, opt), ContractError);
}

TEST_CASE("finite_diff_check flags an injected gradient error") {
  ParamMap params{{"theta", Tensor::scalar(3.0)}};
  ScalarFn f = [](Tape& tape, const ParamMap& p) {
    return mul(tape, p.at("theta"), p.at("theta"));
  };
  FiniteDiffOptions opt;
  opt.tol = 1e-6;
  opt.inject_grad_error = 0.5;
  CHECK_FALSE(finite_diff_check(f, params, opt).pass);
}

TEST_CASE("softmax composite objective gradient") {
  Rng rng(31);
  ParamMap params{{"logits", Tensor::rand_uniform({4, 5}, rng, -2.0, 2.0)}};
  const Tensor target = Tensor::rand_uniform({4, 5}, rng, 0.0, 1.0);
  ScalarFn f = [target](Tape& tape, const ParamMap& p) {
    const Tensor probs = softmax_rows(tape, p.at("logits"));
    const Tensor sq = mul(tape, probs, probs);
    const Tensor mixed = add(tape, mul(tape, target, probs), sq);
    return sum_all(tape, mixed);
  };
  FiniteDiffOptions opt;
  opt.tol = 1e-6;
  CHECK(finite_diff_check(f, params, opt).pass);
}

TEST_CASE("every primitive passes a finite-difference check") {
  Rng rng(101);
  const Tensor a = Tensor::rand_uniform({3, 4}, rng, -1.0, 1.0);
  const Tensor b = Tensor::rand_uniform({4, 5}, rng, -1.0, 1.0);
  const Tensor bt = Tensor::rand_uniform({5, 4}, rng, -1.0, 1.0);
  const Tensor c = Tensor::rand_uniform({3, 4}, rng, -1.0, 1.0);
  const Tensor v = Tensor::rand_uniform({4}, rng, -1.0, 1.0);

  SUBCASE("matmul") {
    ParamMap p{{"a", a}, {"b", b}};
    auto op = [](Tape& t, const ParamMap& m) { return matmul(t, m.at("a"), m.at("b")); };
    CHECK(check_op_gradient(op, p, 1).pass);
  }
  SUBCASE("matmul_nt") {
    ParamMap p{{"a", a}, {"b", bt}};
    auto op = [](Tape& t, const ParamMap& m) { return matmul_nt(t, m.at("a"), m.at("b")); };
    CHECK(check_op_gradient(op, p, 2).pass);
  }
  SUBCASE("transpose") {
    ParamMap p{{"a", a}};
    auto op = [](Tape& t, const ParamMap& m) { return transpose(t, m.at("a")); };
    CHECK(check_op_gradient(op, p, 3).pass);
  }
  SUBCASE("add") {
    ParamMap p{{"a", a}, {"c", c}};
    auto op = [](Tape& t, const ParamMap& m) { return add(t, m.at("a"), m.at("c")); };
    CHECK(check_op_gradient(op, p, 4).pass);
  }
  SUBCASE("add_row_broadcast") {
    ParamMap p{{"a", a}, {"v", v}};
    auto op = [](Tape& t, const ParamMap& m) {
      return add_row_broadcast(t, m.at("a"), m.at("v"));
    };
    CHECK(check_op_gradient(op, p, 5).pass);
  }
  SUBCASE("affine") {
    ParamMap p{{"a", a}};
    auto op = [](Tape& t, const ParamMap& m) { return affine(t, m.at("a"), -1.7, 0.3); };
    CHECK(check_op_gradient(op, p, 6).pass);
  }
  SUBCASE("mul") {
    ParamMap p{{"a", a}, {"c", c}};
    auto op = [](Tape& t, const ParamMap& m) { return mul(t, m.at("a"), m.at("c")); };
    CHECK(check_op_gradient(op, p, 7).pass);
  }
  SUBCASE("relu") {
    ParamMap p{{"a", a}};
    auto op = [](Tape& t, const ParamMap& m) { return relu(t, m.at("a")); };
    CHECK(check_op_gradient(op, p, 8).pass);
  }
  SUBCASE("softmax_rows") {
    ParamMap p{{"a", a}};
    auto op = [](Tape& t, const ParamMap& m) { return softmax_rows(t, m.at("a")); };
    CHECK(check_op_gradient(op, p, 9).pass);
  }
  SUBCASE("layer_norm") {
    Rng r2(55);
    ParamMap p{{"a", a},
               {"gamma", Tensor::rand_uniform({4}, r2, 0.5, 1.5)},
               {"beta", Tensor::rand_uniform({4}, r2, -0.5, 0.5)}};
    auto op = [](Tape& t, const ParamMap& m) {
      return layer_norm(t, m.at("a"), m.at("gamma"), m.at("beta"));
    };
    CHECK(check_op_gradient(op, p, 10).pass);
  }
  SUBCASE("l2_normalize_rows") {
    ParamMap p{{"a", a}};
    auto op = [](Tape& t, const ParamMap& m) { return l2_normalize_rows(t, m.at("a")); };
    CHECK(check_op_gradient(op, p, 11).pass);
  }
  SUBCASE("dropout with pinned stream") {
    ParamMap p{{"a", a}};
    auto op = [](Tape& t, const ParamMap& m) {
      return seeded_dropout(t, m.at("a"), 0.4, Rng(77), true);
    };
    CHECK(check_op_gradient(op, p, 12).pass);
  }
  SUBCASE("concat and slice") {
    ParamMap p{{"a", a}, {"c", c}};
    auto op = [](Tape& t, const ParamMap& m) {
      const Tensor cc = concat_cols(t, m.at("a"), m.at("c"));
      return slice_cols(t, cc, 2, 6);
    };
    CHECK(check_op_gradient(op, p, 13).pass);
  }
  SUBCASE("concat_rows") {
    ParamMap p{{"a", a}, {"c", c}};
    auto op = [](Tape& t, const ParamMap& m) { return concat_rows(t, m.at("a"), m.at("c")); };
    CHECK(check_op_gradient(op, p, 14).pass);
  }
  SUBCASE("gather_rows") {
    ParamMap p{{"a", a}};
    auto op = [](Tape& t, const ParamMap& m) { return gather_rows(t, m.at("a"), {2, 0, 2, 1}); };
    CHECK(check_op_gradient(op, p, 15).pass);
  }
  SUBCASE("row_sums and reshape") {
    ParamMap p{{"a", a}};
    auto op = [](Tape& t, const ParamMap& m) {
      return reshape(t, row_sums(t, m.at("a")), {3, 1});
    };
    CHECK(check_op_gradient(op, p, 16).pass);
  }
  SUBCASE("pair_distance") {
    ParamMap p{{"a", a}};
    auto op = [](Tape& t, const ParamMap& m) {
      return pair_distance(t, m.at("a"), {{0, 1}, {1, 2}, {0, 2}});
    };
    CHECK(check_op_gradient(op, p, 17).pass);
  }
  SUBCASE("bce_with_logits_mean") {
    Rng r3(88);
    ParamMap p{{"z", Tensor::rand_uniform({6}, r3, -2.0, 2.0)}};
    const std::vector<std::uint8_t> labels{1, 0, 1, 1, 0, 0};
    ScalarFn f = [labels](Tape& t, const ParamMap& m) {
      return bce_with_logits_mean(t, m.at("z"), labels);
    };
    FiniteDiffOptions opt;
    opt.tol = 1e-6;
    CHECK(finite_diff_check(f, p, opt).pass);
  }
}

TEST_CASE("pair_distance handles identical rows without blowup") {
  Tape tape;
  const Tensor m = tape.watch(Tensor::matrix(2, 3, {1, 2, 3, 1, 2, 3}));
  const Tensor d = pair_distance(tape, m, {{0, 1}});
  CHECK(d(0) <= 1e-11);
  const Tensor loss = sum_all(tape, d);
  tape.backward(loss);
  CHECK(all_finite(tape.grad(m)));
}

TEST_CASE("rng streams are reproducible and split streams differ") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng s0 = Rng(123).split(0);
  Rng s1 = Rng(123).split(1);
  CHECK(s0.next_u64() != s1.next_u64());
  double mean = 0.0;
  Rng g(5);
  const int n = 20000;
  for (int i = 0; i < n; ++i) mean += g.next_gaussian();
  mean /= n;
  CHECK(std::abs(mean) < 0.05);
}

TEST_SUITE_END();
