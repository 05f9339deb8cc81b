#include <cmath>
#include <vector>

#include "core/ops.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"
#include "doctest.h"
#include "support/gradcheck.hpp"

using namespace mc;
using mc::test::gradcheck;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = true,
                     double lo = -1.0, double hi = 1.0) {
  std::vector<double> vals(static_cast<size_t>(shape_numel(shape)));
  for (auto& v : vals) v = lo + (hi - lo) * rng.uniform();
  return Tensor::from_vector(std::move(shape), std::move(vals), requires_grad);
}

}  // namespace

// ---- matmul ------------------------------------------------------------------

TEST_CASE("matmul identity case") {
  Tensor eye = Tensor::from_vector({2, 2}, {1, 0, 0, 1});
  Tensor v = Tensor::from_vector({2, 1}, {3, 4});
  Tensor out = matmul(eye, v);
  CHECK(out.shape() == Shape{2, 1});
  CHECK(out.at({0, 0}) == 3.0);
  CHECK(out.at({1, 0}) == 4.0);
}

TEST_CASE("matmul 1x2 by 2x1") {
  Tensor a = Tensor::from_vector({1, 2}, {1, 2});
  Tensor b = Tensor::from_vector({2, 1}, {3, 4});
  Tensor out = matmul(a, b);
  CHECK(out.shape() == Shape{1, 1});
  CHECK(out.at({0, 0}) == 11.0);
}

TEST_CASE("matmul rejects mismatched inner dims") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({2, 3});
  CHECK_THROWS_AS(matmul(a, b), shape_error);
}

TEST_CASE("matmul gradient: d sum(a.b) / da = ones . b^T") {
  Rng rng(11);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng);
  Tensor loss = sum(matmul(a, b));
  loss.backward();
  // each row of da equals the row-sums of b
  for (int64_t i = 0; i < 3; ++i)
    for (int64_t p = 0; p < 4; ++p) {
      double expected = b.at({p, 0}) + b.at({p, 1});
      CHECK(a.grad()[i * 4 + p] == doctest::Approx(expected).epsilon(1e-12));
    }
  auto r = gradcheck([&] { return sum(matmul(a, b)); }, {a, b});
  CHECK(r.max_rel_err < 1e-4);
}

// ---- log_softmax / reductions --------------------------------------------------

TEST_CASE("log_softmax of [0,0] is ln 0.5") {
  Tensor x = Tensor::from_vector({2}, {0.0, 0.0});
  Tensor y = log_softmax(x, 0);
  CHECK(y.at({0}) == doctest::Approx(std::log(0.5)).epsilon(1e-12));
  CHECK(y.at({1}) == doctest::Approx(std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("log_softmax is stable for [1000, 0]") {
  Tensor x = Tensor::from_vector({2}, {1000.0, 0.0});
  Tensor y = log_softmax(x, 0);
  CHECK(std::isfinite(y.at({0})));
  CHECK(std::isfinite(y.at({1})));
  CHECK(y.at({0}) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(y.at({1}) == doctest::Approx(-1000.0).epsilon(1e-9));
}

TEST_CASE("log_softmax rows exponentiate-sum to one and are non-positive") {
  Rng rng(7);
  Tensor x = random_tensor({4, 5}, rng, false, -3.0, 3.0);
  Tensor y = log_softmax(x, 1);
  for (int64_t i = 0; i < 4; ++i) {
    double total = 0.0;
    for (int64_t j = 0; j < 5; ++j) {
      CHECK(y.at({i, j}) <= 0.0);
      total += std::exp(y.at({i, j}));
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("softmax matches exp of log_softmax") {
  Rng rng(8);
  Tensor x = random_tensor({3, 4}, rng, false);
  Tensor s = softmax(x, -1);
  for (int64_t i = 0; i < 3; ++i) {
    double total = 0.0;
    for (int64_t j = 0; j < 4; ++j) total += s.at({i, j});
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("logsumexp matches manual computation and handles -inf-ish rows") {
  Tensor x = Tensor::from_vector({2, 3}, {0.0, std::log(2.0), std::log(3.0),
                                          -1e30, -1e30, 0.0});
  Tensor y = logsumexp(x, 1);
  CHECK(y.at({0}) == doctest::Approx(std::log(6.0)).epsilon(1e-12));
  CHECK(y.at({1}) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("reduction gradients match finite differences") {
  Rng rng(9);
  Tensor x = random_tensor({3, 4}, rng);
  CHECK(gradcheck([&] { return sum(x); }, {x}).max_rel_err < 1e-4);
  CHECK(gradcheck([&] { return mean(x); }, {x}).max_rel_err < 1e-4);
  CHECK(gradcheck([&] { return sum(mul(sum(x, 0), sum(x, 0))); }, {x}).max_rel_err < 1e-4);
  CHECK(gradcheck([&] { return sum(mul(mean(x, 1, true), x)); }, {x}).max_rel_err < 1e-4);
  CHECK(gradcheck([&] { return sum(logsumexp(x, 1)); }, {x}).max_rel_err < 1e-4);
  CHECK(gradcheck([&] { return sum(mul(log_softmax(x, 1), x)); }, {x}).max_rel_err < 1e-4);
  CHECK(gradcheck([&] { return sum(mul(softmax(x, 0), x)); }, {x}).max_rel_err < 1e-4);
}

// ---- elementwise and broadcasting ----------------------------------------------

TEST_CASE("broadcast add of [2,1] and [3]") {
  Tensor a = Tensor::from_vector({2, 1}, {1, 10});
  Tensor b = Tensor::from_vector({3}, {1, 2, 3});
  Tensor out = add(a, b);
  REQUIRE(out.shape() == Shape{2, 3});
  CHECK(out.at({0, 0}) == 2.0);
  CHECK(out.at({0, 2}) == 4.0);
  CHECK(out.at({1, 1}) == 12.0);
}

TEST_CASE("incompatible broadcast throws") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({2, 4});
  CHECK_THROWS_AS(add(a, b), shape_error);
}

TEST_CASE("elementwise gradients match finite differences") {
  Rng rng(10);
  Tensor a = random_tensor({2, 3}, rng);
  Tensor b = random_tensor({2, 3}, rng, true, 0.5, 2.0);  // keep div well-behaved
  Tensor c = random_tensor({3}, rng);                     // broadcast operand
  Tensor p = random_tensor({2, 3}, rng, true, 0.5, 2.0);  // positive for log/sqrt

  CHECK(gradcheck([&] { return sum(mul(add(a, b), sub(a, b))); }, {a, b}).max_rel_err < 1e-4);
  CHECK(gradcheck([&] { return sum(div(a, b)); }, {a, b}).max_rel_err < 1e-4);
  CHECK(gradcheck([&] { return sum(mul(a, c)); }, {a, c}).max_rel_err < 1e-4);
  CHECK(gradcheck([&] { return sum(add(c, mul(a, b))); }, {a, b, c}).max_rel_err < 1e-4);
  CHECK(gradcheck([&] { return sum(exp(a)); }, {a}).max_rel_err < 1e-4);
  CHECK(gradcheck([&] { return sum(log(p)); }, {p}).max_rel_err < 1e-4);
  CHECK(gradcheck([&] { return sum(sqrt(p)); }, {p}).max_rel_err < 1e-4);
  CHECK(gradcheck([&] { return sum(sigmoid(a)); }, {a}).max_rel_err < 1e-4);
  CHECK(gradcheck([&] { return sum(swish(a)); }, {a}).max_rel_err < 1e-4);
  CHECK(gradcheck([&] { return sum(mul(scale(a, 2.5), shift(b, -0.5))); }, {a, b}).max_rel_err < 1e-4);
  CHECK(gradcheck([&] { return sum(neg(a)); }, {a}).max_rel_err < 1e-4);
}

TEST_CASE("operator overloads compose") {
  Tensor a = Tensor::from_vector({2}, {1.0, 2.0});
  Tensor b = Tensor::from_vector({2}, {3.0, 4.0});
  Tensor out = (a + b) * 2.0 - 1.0;
  CHECK(out.at({0}) == 7.0);
  CHECK(out.at({1}) == 11.0);
  Tensor r = 1.0 - a;
  CHECK(r.at({0}) == 0.0);
  CHECK(r.at({1}) == -1.0);
}

// ---- shape ops -------------------------------------------------------------------

TEST_CASE("reshape, transpose, slice, concat, stack round values correctly") {
  Tensor x = Tensor::from_vector({2, 3}, {1, 2, 3, 4, 5, 6});

  Tensor r = reshape(x, {3, 2});
  CHECK(r.at({2, 1}) == 6.0);
  CHECK_THROWS_AS(reshape(x, {4, 2}), shape_error);

  Tensor t = transpose(x);
  CHECK(t.shape() == Shape{3, 2});
  CHECK(t.at({0, 1}) == 4.0);
  CHECK(t.at({2, 0}) == 3.0);

  Tensor s = slice(x, 1, 1, 3);
  CHECK(s.shape() == Shape{2, 2});
  CHECK(s.at({0, 0}) == 2.0);
  CHECK(s.at({1, 1}) == 6.0);
  CHECK_THROWS_AS(slice(x, 1, 2, 4), shape_error);

  Tensor c = concat({x, x}, 0);
  CHECK(c.shape() == Shape{4, 3});
  CHECK(c.at({3, 2}) == 6.0);
  Tensor c1 = concat({x, s}, 1);
  CHECK(c1.shape() == Shape{2, 5});
  CHECK(c1.at({0, 4}) == 3.0);

  Tensor row = Tensor::from_vector({3}, {7, 8, 9});
  Tensor st = stack({row, row});
  CHECK(st.shape() == Shape{2, 3});
  CHECK(st.at({1, 2}) == 9.0);
}

TEST_CASE("shape op gradients match finite differences") {
  Rng rng(12);
  Tensor x = random_tensor({2, 4}, rng);
  Tensor y = random_tensor({3, 4}, rng);
  CHECK(gradcheck([&] { return sum(mul(reshape(x, {4, 2}), reshape(x, {4, 2}))); }, {x}).max_rel_err < 1e-4);
  CHECK(gradcheck([&] { return sum(mul(transpose(x), transpose(x))); }, {x}).max_rel_err < 1e-4);
  CHECK(gradcheck([&] { return sum(mul(slice(x, 1, 1, 3), slice(x, 1, 2, 4))); }, {x}).max_rel_err < 1e-4);
  CHECK(gradcheck([&] { return sum(mul(concat({x, y}, 0), concat({x, y}, 0))); }, {x, y}).max_rel_err < 1e-4);
  Tensor a = random_tensor({4}, rng);
  Tensor b = random_tensor({4}, rng);
  CHECK(gradcheck([&] { return sum(mul(stack({a, b}), stack({b, a}))); }, {a, b}).max_rel_err < 1e-4);
}

// ---- indexing -----------------------------------------------------------------------

TEST_CASE("gather and take semantics") {
  Tensor x = Tensor::from_vector({3, 2}, {1, 2, 3, 4, 5, 6});

  Tensor rows = gather_rows(x, {2, 0, 2});
  CHECK(rows.shape() == Shape{3, 2});
  CHECK(rows.at({0, 0}) == 5.0);
  CHECK(rows.at({1, 1}) == 2.0);
  CHECK_THROWS_AS(gather_rows(x, {3}), value_error);

  Tensor cols = gather_cols(x, {1, 1, 0});
  CHECK(cols.shape() == Shape{3, 3});
  CHECK(cols.at({0, 0}) == 2.0);
  CHECK(cols.at({2, 2}) == 5.0);
  CHECK_THROWS_AS(gather_cols(x, {2}), value_error);

  Tensor taken = take_per_row(x, {1, 0, 1});
  CHECK(taken.shape() == Shape{3});
  CHECK(taken.at({0}) == 2.0);
  CHECK(taken.at({1}) == 3.0);
  CHECK(taken.at({2}) == 6.0);
  CHECK_THROWS_AS(take_per_row(x, {0, 0}), shape_error);

  Tensor emb = embedding(x, {0, 0, 1});
  CHECK(emb.at({1, 0}) == 1.0);
}

TEST_CASE("indexing gradients match finite differences (scatter-add on repeats)") {
  Rng rng(13);
  Tensor x = random_tensor({4, 3}, rng);
  CHECK(gradcheck([&] { return sum(mul(gather_rows(x, {1, 1, 3}), gather_rows(x, {0, 2, 3}))); }, {x}).max_rel_err < 1e-4);
  CHECK(gradcheck([&] { return sum(mul(gather_cols(x, {2, 2}), gather_cols(x, {0, 1}))); }, {x}).max_rel_err < 1e-4);
  CHECK(gradcheck([&] { return sum(mul(take_per_row(x, {2, 0, 1, 2}), take_per_row(x, {0, 0, 2, 1}))); }, {x}).max_rel_err < 1e-4);
}

// ---- network ops ----------------------------------------------------------------------

TEST_CASE("dropout is identity at inference or p=0") {
  Rng rng(14);
  Tensor x = Tensor::from_vector({4}, {1, 2, 3, 4}, true);
  Tensor inf = dropout(x, 0.5, rng, false);
  CHECK(inf.impl() == x.impl());
  Tensor p0 = dropout(x, 0.0, rng, true);
  CHECK(p0.impl() == x.impl());
  CHECK_THROWS_AS(dropout(x, 1.0, rng, true), value_error);
}

TEST_CASE("dropout keeps or scales, deterministically per seed") {
  Tensor x = Tensor::full({1000}, 1.0);
  Rng rng1(42), rng2(42);
  Tensor a = dropout(x, 0.25, rng1, true);
  Tensor b = dropout(x, 0.25, rng2, true);
  int64_t kept = 0;
  for (int64_t i = 0; i < 1000; ++i) {
    CHECK(a.at({i}) == b.at({i}));
    if (a.at({i}) != 0.0) {
      CHECK(a.at({i}) == doctest::Approx(1.0 / 0.75));
      ++kept;
    }
  }
  CHECK(kept > 650);
  CHECK(kept < 850);
}

TEST_CASE("dropout gradient matches finite differences with a fixed mask") {
  Rng rng(15);
  Tensor x = random_tensor({3, 3}, rng);
  auto fn = [&] {
    Rng local(99);
    return sum(mul(dropout(x, 0.4, local, true), x));
  };
  CHECK(gradcheck(fn, {x}).max_rel_err < 1e-4);
}

TEST_CASE("layer_norm normalizes the last axis") {
  Tensor x = Tensor::from_vector({2, 4}, {1, 2, 3, 4, -5, 0, 5, 10});
  Tensor gain = Tensor::full({4}, 1.0);
  Tensor bias = Tensor::zeros({4});
  Tensor y = layer_norm(x, gain, bias);
  for (int64_t i = 0; i < 2; ++i) {
    double m = 0.0, v = 0.0;
    for (int64_t j = 0; j < 4; ++j) m += y.at({i, j});
    m /= 4;
    for (int64_t j = 0; j < 4; ++j) v += (y.at({i, j}) - m) * (y.at({i, j}) - m);
    v /= 4;
    CHECK(m == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(v == doctest::Approx(1.0).epsilon(1e-4));
  }
  CHECK_THROWS_AS(layer_norm(x, Tensor::zeros({3}), bias), shape_error);
}

TEST_CASE("layer_norm gradient matches finite differences") {
  Rng rng(16);
  Tensor x = random_tensor({3, 5}, rng);
  Tensor gain = random_tensor({5}, rng, true, 0.5, 1.5);
  Tensor bias = random_tensor({5}, rng);
  auto fn = [&] { return sum(mul(layer_norm(x, gain, bias), x)); };
  CHECK(gradcheck(fn, {x, gain, bias}).max_rel_err < 1e-4);
}

TEST_CASE("glu halves the axis and gates") {
  Tensor x = Tensor::from_vector({1, 4}, {1.0, 2.0, 0.0, 100.0});
  Tensor y = glu(x, -1);
  REQUIRE(y.shape() == Shape{1, 2});
  CHECK(y.at({0, 0}) == doctest::Approx(1.0 * 0.5));          // sigmoid(0)=0.5
  CHECK(y.at({0, 1}) == doctest::Approx(2.0).epsilon(1e-9));  // sigmoid(100)≈1
  CHECK_THROWS_AS(glu(Tensor::zeros({1, 3}), -1), shape_error);
}

TEST_CASE("glu gradient matches finite differences") {
  Rng rng(17);
  Tensor x = random_tensor({3, 6}, rng);
  CHECK(gradcheck([&] { return sum(mul(glu(x, -1), glu(x, -1))); }, {x}).max_rel_err < 1e-4);
}

TEST_CASE("depthwise_conv1d computes per-channel correlation with zero padding") {
  // T=3, C=1, kernel [1,2,3]: out[t] = sum_q x[t+q-1]*w[q]
  Tensor x = Tensor::from_vector({3, 1}, {1, 2, 3});
  Tensor w = Tensor::from_vector({3, 1}, {1, 2, 3});
  Tensor y = depthwise_conv1d(x, w);
  CHECK(y.at({0, 0}) == doctest::Approx(1 * 2 + 2 * 3));          // x[-1]=0
  CHECK(y.at({1, 0}) == doctest::Approx(1 * 1 + 2 * 2 + 3 * 3));
  CHECK(y.at({2, 0}) == doctest::Approx(2 * 1 + 3 * 2));          // x[3]=0
  CHECK_THROWS_AS(depthwise_conv1d(x, Tensor::zeros({2, 1})), shape_error);
  CHECK_THROWS_AS(depthwise_conv1d(x, Tensor::zeros({3, 2})), shape_error);
}

TEST_CASE("depthwise_conv1d channels stay independent") {
  Tensor x = Tensor::from_vector({2, 2}, {1, 10, 2, 20});
  Tensor w = Tensor::from_vector({1, 2}, {3, 0.5});
  Tensor y = depthwise_conv1d(x, w);
  CHECK(y.at({0, 0}) == 3.0);
  CHECK(y.at({0, 1}) == 5.0);
  CHECK(y.at({1, 0}) == 6.0);
  CHECK(y.at({1, 1}) == 10.0);
}

TEST_CASE("depthwise_conv1d gradient matches finite differences") {
  Rng rng(18);
  Tensor x = random_tensor({5, 3}, rng);
  Tensor w = random_tensor({3, 3}, rng);
  auto fn = [&] { return sum(mul(depthwise_conv1d(x, w), x)); };
  CHECK(gradcheck(fn, {x, w}).max_rel_err < 1e-4);
}

TEST_CASE("cross entropy from log probs: uniform predictions") {
  // 3 rows uniform over 10 classes -> loss 3*ln 10
  Tensor logits = Tensor::zeros({3, 10}, true);
  Tensor logp = log_softmax(logits, 1);
  Tensor loss = cross_entropy_from_log_probs(logp, {0, 5, 9});
  CHECK(loss.item() == doctest::Approx(3.0 * std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy gradient matches finite differences") {
  Rng rng(19);
  Tensor x = random_tensor({4, 6}, rng);
  auto fn = [&] { return cross_entropy_from_log_probs(log_softmax(x, 1), {1, 0, 5, 3}); };
  CHECK(gradcheck(fn, {x}).max_rel_err < 1e-4);
}

// ---- non-differentiable helpers ---------------------------------------------------------

TEST_CASE("argmax helpers, ties to the first maximum") {
  std::vector<double> v = {1.0, 3.0, 3.0, 2.0};
  CHECK(argmax_span(v) == 1);
  Tensor m = Tensor::from_vector({2, 3}, {0, 1, 0, 5, 5, 5});
  auto rows = argmax_rows(m);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == 1);
  CHECK(rows[1] == 0);
}
