#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "xferlab/gradcore/tensor.hpp"

namespace xferlab::grad {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Keep parameters float32-representable after every step.
  bool store_float32 = true;
};

struct AdamState {
  AdamConfig config;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t t = 0;
};

AdamState make_adam_state(std::span<const Tensor> params, AdamConfig config = {});

// One bias-corrected Adam update with explicit gradients.
void adam_step(std::span<Tensor> params, std::span<const std::vector<double>> grads,
               AdamState& state);

// Same, reading each parameter's accumulated gradient (zero if absent).
void adam_step(std::span<Tensor> params, AdamState& state);

}  // namespace xferlab::grad
