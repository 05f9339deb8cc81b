#include <vector>

#include "core/ops.hpp"
#include "core/tensor.hpp"
#include "doctest.h"

using namespace mc;

TEST_CASE("factories and accessors") {
  Tensor z = Tensor::zeros({2, 3});
  CHECK(z.shape() == Shape{2, 3});
  CHECK(z.numel() == 6);
  CHECK(z.ndim() == 2);
  CHECK(z.size(0) == 2);
  CHECK(z.size(-1) == 3);
  for (double v : z.data()) CHECK(v == 0.0);

  Tensor f = Tensor::full({2}, 1.5);
  CHECK(f.at({0}) == 1.5);
  CHECK(f.at({1}) == 1.5);

  Tensor s = Tensor::scalar(4.0);
  CHECK(s.ndim() == 0);
  CHECK(s.item() == 4.0);

  Tensor v = Tensor::from_vector({2, 2}, {1, 2, 3, 4});
  CHECK(v.at({1, 0}) == 3.0);
  CHECK_THROWS_AS(Tensor::from_vector({2, 2}, {1, 2, 3}), shape_error);
  CHECK_THROWS_AS(v.item(), value_error);
}

TEST_CASE("backward of sum gives ones") {
  Tensor x = Tensor::from_vector({3}, {1.0, -2.0, 0.5}, true);
  Tensor loss = sum(x);
  loss.backward();
  REQUIRE(x.has_grad());
  for (double g : x.grad()) CHECK(g == 1.0);
}

TEST_CASE("backward of sum(x*x) gives 2x") {
  std::vector<double> vals = {1.0, -2.0, 0.5, 3.0};
  Tensor x = Tensor::from_vector({4}, vals, true);
  Tensor loss = sum(mul(x, x));
  loss.backward();
  REQUIRE(x.has_grad());
  for (size_t i = 0; i < vals.size(); ++i)
    CHECK(x.grad()[i] == doctest::Approx(2.0 * vals[i]).epsilon(1e-12));
}

TEST_CASE("backward requires a scalar loss") {
  Tensor x = Tensor::from_vector({2}, {1.0, 2.0}, true);
  CHECK_THROWS_AS(mul(x, x).backward(), value_error);
}

TEST_CASE("leaf gradients accumulate across backward calls; zero_grad resets") {
  Tensor x = Tensor::from_vector({2}, {3.0, 4.0}, true);
  Tensor loss = sum(x);
  loss.backward();
  loss.backward();
  CHECK(x.grad()[0] == 2.0);
  x.zero_grad();
  CHECK(!x.has_grad());
  loss.backward();
  CHECK(x.grad()[0] == 1.0);
}

TEST_CASE("repeated backward on a diamond graph stays correct") {
  // y = x + x uses x twice; interior grads must reset between calls.
  Tensor x = Tensor::from_vector({2}, {1.0, 2.0}, true);
  Tensor y = add(x, x);
  Tensor loss = sum(mul(y, y));  // d/dx = 8x
  loss.backward();
  CHECK(x.grad()[0] == doctest::Approx(8.0));
  CHECK(x.grad()[1] == doctest::Approx(16.0));
  x.zero_grad();
  loss.backward();
  CHECK(x.grad()[0] == doctest::Approx(8.0));
  CHECK(x.grad()[1] == doctest::Approx(16.0));
}

TEST_CASE("NoGradGuard suppresses graph recording") {
  Tensor x = Tensor::from_vector({2}, {1.0, 2.0}, true);
  NoGradGuard guard;
  Tensor y = sum(mul(x, x));
  CHECK(!y.requires_grad());
  CHECK(!y.impl()->backprop);
}

TEST_CASE("ops without requires_grad inputs record nothing") {
  Tensor x = Tensor::from_vector({2}, {1.0, 2.0});
  Tensor y = sum(x);
  CHECK(!y.requires_grad());
  CHECK(!y.impl()->backprop);
}

TEST_CASE("gradients flow through shared subexpressions") {
  Tensor x = Tensor::from_vector({2}, {1.0, 3.0}, true);
  Tensor s = sum(x);              // used twice below
  Tensor loss = add(mul(s, s), s);  // f = s^2 + s, df/ds = 2s + 1 = 9
  loss.backward();
  CHECK(x.grad()[0] == doctest::Approx(9.0));
  CHECK(x.grad()[1] == doctest::Approx(9.0));
}
