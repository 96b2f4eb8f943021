#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "xferlab/gradcore/tensor.hpp"

namespace xferlab::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// Central finite differences on every entry of every parameter, compared with
// the gradients produced by backward(). |a - n| / max(|a|, |n|, floor).
inline GradCheckResult gradient_check(std::vector<grad::Tensor> params,
                                      const std::function<grad::Tensor()>& loss_fn,
                                      double step = 1e-3, double floor = 1e-6) {
  for (auto& p : params) p.zero_grad();
  grad::backward(loss_fn());
  std::vector<std::vector<double>> analytic;
  for (auto& p : params) analytic.push_back(p.grad());

  GradCheckResult result;
  grad::NoGradGuard no_grad;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].mutable_data();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double saved = values[j];
      values[j] = saved + step;
      const double up = loss_fn().item();
      values[j] = saved - step;
      const double down = loss_fn().item();
      values[j] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[i][j];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(a - numeric) / denom);
      ++result.checked;
    }
  }
  return result;
}

}  // namespace xferlab::testing
