#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "xferlab/gradcore/tensor.hpp"

namespace xferlab::grad {

// All ops work on rank-2 tensors unless stated otherwise. Binary pointwise
// ops accept equal shapes or a single-element operand (scalar broadcast).

// C[i,j] = sum_l A[i,l] * B[l,j]
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
Tensor square(const Tensor& x);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor exp(const Tensor& x);
// Throws DomainError on any non-positive entry.
Tensor log(const Tensor& x);
// log(max(x, floor)); the gradient is zero where the floor is active.
Tensor log_floored(const Tensor& x, double floor);
Tensor relu(const Tensor& x);

enum class Elementwise { add, sub, mul, sigmoid, tanh, exp, log, relu };
Tensor elementwise(Elementwise kind, std::span<const Tensor> inputs);

// Row-wise softmax with max subtraction.
Tensor softmax_rows(const Tensor& x);

// Reductions to a 1x1 tensor.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// X[n,k] + b[1,k] on every row.
Tensor add_row(const Tensor& x, const Tensor& row);
// c[n,1] * X[n,k], each row scaled by its coefficient.
Tensor mul_col(const Tensor& col, const Tensor& x);

Tensor row_slice(const Tensor& x, std::size_t start, std::size_t count);
Tensor col_slice(const Tensor& x, std::size_t start, std::size_t count);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
// Y[i,:] = X[index[i],:]
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index);
// Y[i,0] = X[i, index[i]]
Tensor pick(const Tensor& x, std::span<const std::size_t> index);

// Reinterprets the row-major buffer under a new shape of equal size.
Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

}  // namespace xferlab::grad
