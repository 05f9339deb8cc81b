#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "core/tensor.hpp"

namespace mc::test {

struct GradCheckResult {
  double max_rel_err = 0.0;
  int64_t n_checked = 0;
};

// Central finite-difference oracle for reverse-mode gradients.
//
// `fn` must rebuild its graph from the current leaf values on every call and
// return a scalar loss; it is re-evaluated with each leaf coordinate nudged
// by ±step. Stochastic ops inside fn must reseed so repeated calls agree.
inline GradCheckResult gradcheck(const std::function<Tensor()>& fn,
                                 std::vector<Tensor> leaves,
                                 double step = 1e-5) {
  for (auto& leaf : leaves) leaf.zero_grad();
  Tensor loss = fn();
  loss.backward();

  std::vector<std::vector<double>> analytic;
  for (auto& leaf : leaves) {
    if (!leaf.has_grad())
      throw value_error("gradcheck: loss does not reach a leaf");
    analytic.emplace_back(leaf.grad().begin(), leaf.grad().end());
  }

  GradCheckResult result;
  NoGradGuard no_grad;
  for (size_t p = 0; p < leaves.size(); ++p) {
    auto values = leaves[p].mutable_data();
    for (size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + step;
      const double up = fn().item();
      values[i] = orig - step;
      const double down = fn().item();
      values[i] = orig;
      const double fd = (up - down) / (2.0 * step);
      const double a = analytic[p][i];
      const double rel =
          std::fabs(a - fd) / std::max({std::fabs(a), std::fabs(fd), 1e-6});
      result.max_rel_err = std::max(result.max_rel_err, rel);
      ++result.n_checked;
    }
  }
  return result;
}

}  // namespace mc::test
