#pragma once

// Central finite-difference gradient oracle. Rebuilds the forward pass around
// perturbed leaf values and compares the analytic gradient against
// (f(x+h) - f(x-h)) / 2h, elementwise, with a relative-error criterion. Kept
// independent of the autodiff internals on purpose.

#include <cmath>
#include <functional>
#include <vector>

#include "eend/tensor.hpp"

namespace gradcheck {

struct Result {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// `forward` must rebuild the full graph from the given leaves and return the
// scalar loss Value. Leaves must be parameter Values; their current data is
// perturbed in place for the finite differences. The denominator floor keeps
// rounding noise on exactly-zero gradients (e.g. softmax shift invariance)
// from registering as error.
inline Result check(const std::function<eend::Value()>& forward,
                    const std::vector<eend::Value>& leaves, double h = 1e-5,
                    double floor = 1e-3) {
  using eend::Value;

  for (const auto& leaf : leaves) Value(leaf).zero_grad();
  Value loss = forward();
  eend::backward(loss);

  Result res;
  for (const auto& leaf : leaves) {
    eend::Tensor& data = const_cast<eend::Tensor&>(leaf.val());
    for (std::size_t i = 0; i < data.size(); ++i) {
      double orig = data.data()[i];
      data.data()[i] = orig + h;
      double f_plus = forward().val().item();
      data.data()[i] = orig - h;
      double f_minus = forward().val().item();
      data.data()[i] = orig;

      double numeric = (f_plus - f_minus) / (2.0 * h);
      double analytic = leaf.grad().data()[i];
      double denom = std::max({std::abs(numeric), std::abs(analytic), floor});
      double rel = std::abs(numeric - analytic) / denom;
      res.max_rel_error = std::max(res.max_rel_error, rel);
      ++res.checked;
    }
  }
  return res;
}

}  // namespace gradcheck
