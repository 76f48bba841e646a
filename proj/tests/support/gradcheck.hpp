#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "wctdef/rng.hpp"
#include "wctdef/tensor.hpp"

// Finite-difference gradient oracle. Re-evaluates a scalar forward functor
// while nudging one input slot at a time; independent of the tape machinery
// it is used to check.
namespace gradcheck {

inline double central_diff(const std::function<double()>& forward, double& slot,
                           double h = 1e-5) {
  const double orig = slot;
  slot = orig + h;
  const double fp = forward();
  slot = orig - h;
  const double fm = forward();
  slot = orig;
  return (fp - fm) / (2.0 * h);
}

// Relative error with a small absolute guard so near-zero gradients are
// compared absolutely (central differences bottom out around 1e-10).
inline double rel_err(double analytic, double numeric) {
  const double denom =
      std::max({std::abs(analytic), std::abs(numeric), 1e-4});
  return std::abs(analytic - numeric) / denom;
}

// Max relative error between tensor.grad() and finite differences of
// `forward` over every element of `t`.
inline double max_grad_err(wctdef::Tensor& t,
                           const std::function<double()>& forward,
                           double h = 1e-5) {
  double worst = 0.0;
  const auto& g = t.grad();
  for (size_t i = 0; i < t.numel(); ++i) {
    const double fd = central_diff(forward, t.data()[i], h);
    worst = std::max(worst, rel_err(g[i], fd));
  }
  return worst;
}

inline wctdef::Tensor random_tensor(wctdef::Shape shape, wctdef::Rng& rng,
                                    double lo = -1.0, double hi = 1.0,
                                    bool requires_grad = false) {
  std::vector<double> v(wctdef::shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return wctdef::Tensor::from_data(std::move(shape), std::move(v),
                                   requires_grad);
}

}  // namespace gradcheck
