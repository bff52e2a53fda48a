#pragma once

// Central finite-difference oracle for gradient checks. Works purely from
// forward values, so it stays independent of the tape's adjoint code.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "hatesense/tensor.hpp"

namespace fdcheck {

// Relative error with a floor on the denominator: at h=1e-5 in double
// precision, roundoff on the difference quotient is ~|f|*1e-11, so
// gradients below ~1e-4 can only be compared absolutely.
inline double rel_error(double a, double b) {
  const double denom = std::max({1e-4, std::abs(a), std::abs(b)});
  return std::abs(a - b) / denom;
}

struct FdResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// Compares already-populated analytic gradients of `params` against central
// differences of `loss_value`, which must re-run the forward pass from the
// tensors' current contents.
inline FdResult compare_to_fd(const std::vector<hatesense::Tensor>& params,
                              const std::function<double()>& loss_value,
                              double h = 1e-5) {
  FdResult result;
  for (const hatesense::Tensor& p : params) {
    hatesense::Tensor param = p;  // shared handle
    auto& data = param.data();
    const auto& grad = param.grad();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double original = data[i];
      data[i] = original + h;
      const double up = loss_value();
      data[i] = original - h;
      const double down = loss_value();
      data[i] = original;
      const double numeric = (up - down) / (2.0 * h);
      result.max_rel_error =
          std::max(result.max_rel_error, rel_error(grad[i], numeric));
      ++result.checked;
    }
  }
  return result;
}

}  // namespace fdcheck
