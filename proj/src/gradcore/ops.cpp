#include "xferlab/gradcore/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Core>

#include "xferlab/error.hpp"

namespace xferlab::grad {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMajor>;

void require_rank2(const Tensor& x, const char* op) {
  if (x.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " +
                         shape_str(x.shape()));
  }
}

std::string pair_str(const Tensor& a, const Tensor& b) {
  return shape_str(a.shape()) + " and " + shape_str(b.shape());
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.size());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  return make_result(x.shape(), std::move(out), {x}, [deriv](Node& self) {
    Node& a = *self.parents[0];
    if (!a.requires_grad) return;
    auto& ga = a.ensure_grad();
    for (std::size_t i = 0; i < ga.size(); ++i) {
      ga[i] += self.grad[i] * deriv(a.value[i], self.value[i]);
    }
  });
}

enum class BinaryKind { add, sub, mul };

Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind, const char* name) {
  const bool same = a.shape() == b.shape();
  const bool a_scalar = a.size() == 1;
  const bool b_scalar = b.size() == 1;
  if (!same && !a_scalar && !b_scalar) {
    throw DimensionError(std::string(name) + ": incompatible shapes " + pair_str(a, b));
  }
  const Shape shape = same ? a.shape() : (a_scalar ? b.shape() : a.shape());
  const std::size_t n = shape_size(shape);
  const std::size_t sa = a.size() == 1 ? 0 : 1;
  const std::size_t sb = b.size() == 1 ? 0 : 1;
  std::vector<double> out(n);
  const auto va = a.data();
  const auto vb = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = va[i * sa];
    const double y = vb[i * sb];
    out[i] = kind == BinaryKind::add ? x + y : kind == BinaryKind::sub ? x - y : x * y;
  }
  return make_result(shape, std::move(out), {a, b}, [kind, sa, sb](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const std::size_t n = self.grad.size();
    if (pa.requires_grad) {
      auto& ga = pa.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        const double d = kind == BinaryKind::mul ? self.grad[i] * pb.value[i * sb] : self.grad[i];
        ga[i * sa] += d;
      }
    }
    if (pb.requires_grad) {
      auto& gb = pb.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        double d = self.grad[i];
        if (kind == BinaryKind::sub) d = -d;
        if (kind == BinaryKind::mul) d *= pa.value[i * sa];
        gb[i * sb] += d;
      }
    }
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) throw DimensionError("matmul: inner dimensions differ for " + pair_str(a, b));
  std::vector<double> out(m * n);
  const auto ei = [](std::size_t v) { return static_cast<Eigen::Index>(v); };
  ConstMatrixMap ma(a.data().data(), ei(m), ei(k));
  ConstMatrixMap mb(b.data().data(), ei(k), ei(n));
  MatrixMap(out.data(), ei(m), ei(n)).noalias() = ma * mb;
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n, ei](Node& self) {
    Node& na = *self.parents[0];
    Node& nb = *self.parents[1];
    ConstMatrixMap g(self.grad.data(), ei(m), ei(n));
    if (na.requires_grad) {
      MatrixMap(na.ensure_grad().data(), ei(m), ei(k)).noalias() +=
          g * ConstMatrixMap(nb.value.data(), ei(k), ei(n)).transpose();
    }
    if (nb.requires_grad) {
      MatrixMap(nb.ensure_grad().data(), ei(k), ei(n)).noalias() +=
          ConstMatrixMap(na.value.data(), ei(m), ei(k)).transpose() * g;
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::mul, "mul"); }

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(
      x, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor square(const Tensor& x) {
  return unary(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  for (double v : x.data()) {
    if (!(v > 0.0)) throw DomainError("log: non-positive input " + std::to_string(v));
  }
  return unary(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor log_floored(const Tensor& x, double floor) {
  if (!(floor > 0.0)) throw ParameterError("log_floored: floor must be positive");
  return unary(
      x, [floor](double v) { return std::log(std::max(v, floor)); },
      [floor](double v, double) { return v > floor ? 1.0 / v : 0.0; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor elementwise(Elementwise kind, std::span<const Tensor> inputs) {
  const bool is_binary =
      kind == Elementwise::add || kind == Elementwise::sub || kind == Elementwise::mul;
  const std::size_t arity = is_binary ? 2 : 1;
  if (inputs.size() != arity) {
    throw ContractError("elementwise: expected " + std::to_string(arity) + " inputs, got " +
                        std::to_string(inputs.size()));
  }
  switch (kind) {
    case Elementwise::add: return add(inputs[0], inputs[1]);
    case Elementwise::sub: return sub(inputs[0], inputs[1]);
    case Elementwise::mul: return mul(inputs[0], inputs[1]);
    case Elementwise::sigmoid: return sigmoid(inputs[0]);
    case Elementwise::tanh: return tanh(inputs[0]);
    case Elementwise::exp: return exp(inputs[0]);
    case Elementwise::log: return log(inputs[0]);
    case Elementwise::relu: return relu(inputs[0]);
  }
  throw ContractError("elementwise: unknown op");
}

Tensor softmax_rows(const Tensor& x) {
  require_rank2(x, "softmax_rows");
  const std::size_t n = x.rows(), k = x.cols();
  std::vector<double> out(n * k);
  const auto in = x.data();
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, in[i * k + j]);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      out[i * k + j] = std::exp(in[i * k + j] - mx);
      total += out[i * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] /= total;
  }
  return make_result({n, k}, std::move(out), {x}, [n, k](Node& self) {
    Node& a = *self.parents[0];
    if (!a.requires_grad) return;
    auto& ga = a.ensure_grad();
    for (std::size_t i = 0; i < n; ++i) {
      const double* y = self.value.data() + i * k;
      const double* g = self.grad.data() + i * k;
      double dot = 0.0;
      for (std::size_t j = 0; j < k; ++j) dot += y[j] * g[j];
      for (std::size_t j = 0; j < k; ++j) ga[i * k + j] += y[j] * (g[j] - dot);
    }
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result({1, 1}, {total}, {x}, [](Node& self) {
    Node& a = *self.parents[0];
    if (!a.requires_grad) return;
    auto& ga = a.ensure_grad();
    for (auto& g : ga) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor add_row(const Tensor& x, const Tensor& row) {
  require_rank2(x, "add_row");
  const std::size_t n = x.rows(), k = x.cols();
  if (row.size() != k) throw DimensionError("add_row: row size mismatch for " + pair_str(x, row));
  std::vector<double> out(x.data().begin(), x.data().end());
  const auto r = row.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] += r[j];
  }
  return make_result({n, k}, std::move(out), {x, row}, [n, k](Node& self) {
    Node& a = *self.parents[0];
    Node& b = *self.parents[1];
    if (a.requires_grad) {
      auto& ga = a.ensure_grad();
      for (std::size_t i = 0; i < n * k; ++i) ga[i] += self.grad[i];
    }
    if (b.requires_grad) {
      auto& gb = b.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) gb[j] += self.grad[i * k + j];
      }
    }
  });
}

Tensor mul_col(const Tensor& col, const Tensor& x) {
  require_rank2(x, "mul_col");
  const std::size_t n = x.rows(), k = x.cols();
  if (col.size() != n) throw DimensionError("mul_col: column size mismatch for " + pair_str(col, x));
  std::vector<double> out(n * k);
  const auto c = col.data();
  const auto v = x.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] = c[i] * v[i * k + j];
  }
  return make_result({n, k}, std::move(out), {col, x}, [n, k](Node& self) {
    Node& pc = *self.parents[0];
    Node& px = *self.parents[1];
    if (pc.requires_grad) {
      auto& gc = pc.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < k; ++j) acc += self.grad[i * k + j] * px.value[i * k + j];
        gc[i] += acc;
      }
    }
    if (px.requires_grad) {
      auto& gx = px.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) gx[i * k + j] += self.grad[i * k + j] * pc.value[i];
      }
    }
  });
}

Tensor row_slice(const Tensor& x, std::size_t start, std::size_t count) {
  require_rank2(x, "row_slice");
  const std::size_t k = x.cols();
  if (count == 0 || start + count > x.rows()) {
    throw DimensionError("row_slice: rows [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") out of " + shape_str(x.shape()));
  }
  const auto in = x.data();
  std::vector<double> out(in.begin() + static_cast<std::ptrdiff_t>(start * k),
                          in.begin() + static_cast<std::ptrdiff_t>((start + count) * k));
  return make_result({count, k}, std::move(out), {x}, [start, k](Node& self) {
    Node& a = *self.parents[0];
    if (!a.requires_grad) return;
    auto& ga = a.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[start * k + i] += self.grad[i];
  });
}

Tensor col_slice(const Tensor& x, std::size_t start, std::size_t count) {
  require_rank2(x, "col_slice");
  const std::size_t n = x.rows(), k = x.cols();
  if (count == 0 || start + count > k) {
    throw DimensionError("col_slice: cols [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") out of " + shape_str(x.shape()));
  }
  std::vector<double> out(n * count);
  const auto in = x.data();
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(i * k + start), count,
                out.begin() + static_cast<std::ptrdiff_t>(i * count));
  }
  return make_result({n, count}, std::move(out), {x}, [n, k, start, count](Node& self) {
    Node& a = *self.parents[0];
    if (!a.requires_grad) return;
    auto& ga = a.ensure_grad();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < count; ++j) ga[i * k + start + j] += self.grad[i * count + j];
    }
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const std::size_t k = parts[0].cols();
  std::size_t n = 0;
  for (const auto& p : parts) {
    if (p.cols() != k) throw DimensionError("concat_rows: column mismatch " + pair_str(parts[0], p));
    n += p.rows();
  }
  std::vector<double> out;
  out.reserve(n * k);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return make_result({n, k}, std::move(out), std::move(parents), [](Node& self) {
    std::size_t offset = 0;
    for (auto& p : self.parents) {
      if (p->requires_grad) {
        auto& gp = p->ensure_grad();
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += self.grad[offset + i];
      }
      offset += p->value.size();
    }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t n = parts[0].rows();
  std::size_t k = 0;
  for (const auto& p : parts) {
    if (p.rows() != n) throw DimensionError("concat_cols: row mismatch " + pair_str(parts[0], p));
    k += p.cols();
  }
  std::vector<double> out(n * k);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t c = p.cols();
    const auto in = p.data();
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(i * c), c,
                  out.begin() + static_cast<std::ptrdiff_t>(i * k + offset));
    }
    offset += c;
  }
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return make_result({n, k}, std::move(out), std::move(parents), [n, k](Node& self) {
    std::size_t offset = 0;
    for (auto& p : self.parents) {
      const std::size_t c = p->shape[1];
      if (p->requires_grad) {
        auto& gp = p->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < c; ++j) gp[i * c + j] += self.grad[i * k + offset + j];
        }
      }
      offset += c;
    }
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
  require_rank2(x, "gather_rows");
  const std::size_t k = x.cols();
  if (index.empty()) throw DimensionError("gather_rows: empty index");
  std::vector<double> out(index.size() * k);
  const auto in = x.data();
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= x.rows()) {
      throw DimensionError("gather_rows: row " + std::to_string(index[i]) + " out of " +
                           shape_str(x.shape()));
    }
    std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(index[i] * k), k,
                out.begin() + static_cast<std::ptrdiff_t>(i * k));
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_result({idx.size(), k}, std::move(out), {x}, [idx, k](Node& self) {
    Node& a = *self.parents[0];
    if (!a.requires_grad) return;
    auto& ga = a.ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = 0; j < k; ++j) ga[idx[i] * k + j] += self.grad[i * k + j];
    }
  });
}

Tensor pick(const Tensor& x, std::span<const std::size_t> index) {
  require_rank2(x, "pick");
  const std::size_t n = x.rows(), k = x.cols();
  if (index.size() != n) {
    throw DimensionError("pick: " + std::to_string(index.size()) + " indices for " +
                         shape_str(x.shape()));
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (index[i] >= k) throw DimensionError("pick: column " + std::to_string(index[i]) + " out of range");
    out[i] = x.data()[i * k + index[i]];
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_result({n, 1}, std::move(out), {x}, [idx, k](Node& self) {
    Node& a = *self.parents[0];
    if (!a.requires_grad) return;
    auto& ga = a.ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i) ga[i * k + idx[i]] += self.grad[i];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), {x}, [](Node& self) {
    Node& a = *self.parents[0];
    if (!a.requires_grad) return;
    auto& ga = a.ensure_grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
  });
}

Tensor transpose(const Tensor& x) {
  require_rank2(x, "transpose");
  const std::size_t n = x.rows(), k = x.cols();
  std::vector<double> out(n * k);
  const auto in = x.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) out[j * n + i] = in[i * k + j];
  }
  return make_result({k, n}, std::move(out), {x}, [n, k](Node& self) {
    Node& a = *self.parents[0];
    if (!a.requires_grad) return;
    auto& ga = a.ensure_grad();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) ga[i * k + j] += self.grad[j * n + i];
    }
  });
}

}  // namespace xferlab::grad
