#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "xferlab/gradcore/tensor.hpp"

namespace xferlab::grad {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

using ParamList = std::vector<NamedTensor>;

std::vector<Tensor> tensors_of(const ParamList& params);

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], float32-representable,
// requires_grad set.
Tensor init_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng);

// Sum of squares of every parameter value (graph-registered).
Tensor squared_l2(const ParamList& params);

// Checkpoint file: "XFERLAB1", then per tensor: u64 name length, UTF-8 name,
// u64 rank, rank x u64 extents, row-major float32 payload. All little-endian.
void save_checkpoint(const std::filesystem::path& path, const ParamList& params);
ParamList load_checkpoint(const std::filesystem::path& path);

// Copies checkpoint values into an existing parameter list by name. Every
// name must be present with a matching shape.
void assign_params(ParamList& target, const ParamList& source);

}  // namespace xferlab::grad
