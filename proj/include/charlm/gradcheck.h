#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "charlm/tensor.h"

// Central-difference gradient checker. fn must be a deterministic function
// of the given leaves; it is re-evaluated under NoGradGuard with each
// element perturbed by +-eps and the finite-difference slope is compared
// against the reverse-mode gradient. Returns the max relative error.

namespace charlm {

template <typename T>
double grad_check(const std::function<TensorT<T>(void)>& fn, std::vector<TensorT<T>> leaves,
                  double eps = 1e-5) {
  for (auto& leaf : leaves) {
    leaf.set_requires_grad(true);
    leaf.zero_grad();
  }
  TensorT<T> loss = fn();
  loss.backward();

  std::vector<std::vector<T>> analytic;
  analytic.reserve(leaves.size());
  for (auto& leaf : leaves) analytic.push_back(leaf.grad());

  double max_rel = 0.0;
  NoGradGuard ng;
  for (size_t li = 0; li < leaves.size(); ++li) {
    auto& vals = leaves[li].values();
    for (size_t i = 0; i < vals.size(); ++i) {
      const T orig = vals[i];
      vals[i] = orig + static_cast<T>(eps);
      const double up = static_cast<double>(fn().item());
      vals[i] = orig - static_cast<T>(eps);
      const double down = static_cast<double>(fn().item());
      vals[i] = orig;
      const double fd = (up - down) / (2.0 * eps);
      const double ad = static_cast<double>(analytic[li][i]);
      const double denom = std::max(std::abs(ad) + std::abs(fd), 1e-4);
      max_rel = std::max(max_rel, std::abs(ad - fd) / denom);
    }
  }
  return max_rel;
}

}  // namespace charlm
