// Helpers shared by the test binaries: finite-difference oracle and misc.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "tagg/rng.hpp"
#include "tagg/tensor.hpp"

namespace tagg::testutil {

// Central finite differences of `loss_fn` (a fresh forward pass over the
// current parameter values) with respect to every element of `param`.
// The loss function must not mutate the parameters.
inline std::vector<double> finite_diff(tagg::Tensor& param,
                                       const std::function<double()>& loss_fn,
                                       double h = 1e-5) {
  std::vector<double> grad(static_cast<size_t>(param.size()));
  for (int64_t i = 0; i < param.size(); ++i) {
    const double saved = param.data()[i];
    param.data()[i] = saved + h;
    const double up = loss_fn();
    param.data()[i] = saved - h;
    const double down = loss_fn();
    param.data()[i] = saved;
    grad[static_cast<size_t>(i)] = (up - down) / (2.0 * h);
  }
  return grad;
}

// Largest relative error between analytic and finite-difference gradients.
// The denominator floor absorbs central-difference roundoff (~eps*|L|/h,
// about 1e-10 here) on near-zero gradients; real formula errors on any
// gradient of magnitude >= 1e-3 still register well above 1e-4.
inline double max_rel_err(const tagg::Tensor& analytic, const std::vector<double>& fd) {
  double worst = 0.0;
  for (int64_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic.data()[i];
    const double f = fd[static_cast<size_t>(i)];
    const double denom = std::max(std::abs(a) + std::abs(f), 1e-3);
    worst = std::max(worst, std::abs(a - f) / denom);
  }
  return worst;
}

inline tagg::Tensor random_tensor(std::vector<int> shape, tagg::Rng& rng, double lo = -2.0,
                                  double hi = 2.0) {
  tagg::Tensor t = tagg::Tensor::zeros(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(lo, hi);
  return t;
}

}  // namespace tagg::testutil
