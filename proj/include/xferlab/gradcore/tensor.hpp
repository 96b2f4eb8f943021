#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace xferlab::grad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

// One vertex of the reverse-mode graph. Interior nodes own a closure that
// pushes their gradient into their parents; leaves own persistent grads.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
  std::uint64_t id = 0;

  std::vector<double>& ensure_grad();
};

// Dense row-major tensor handle with reference semantics. Copies share the
// underlying node; use clone() for an independent copy.
//
// Values are stored in double precision. Trainable parameters are kept
// float32-representable (see round_to_float32) so that checkpoints are exact.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value);
  // Rank-2 convenience: rows x cols.
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  // Rank-2 accessors; throw DimensionError on other ranks.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return node_->value; }
  std::span<double> mutable_data() { return node_->value; }
  double operator[](std::size_t i) const { return node_->value[i]; }
  double at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  // Zeros when no gradient has been accumulated.
  std::vector<double> grad() const;
  std::span<const double> grad_span() const { return node_->grad; }
  void zero_grad();

  std::uint64_t id() const { return node_->id; }
  bool is_leaf() const { return node_->parents.empty(); }

  // Same values, no graph history.
  Tensor detach() const;
  // Deep copy that keeps requires_grad but no history.
  Tensor clone() const;

  Node& node() const { return *node_; }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Rounds every value to the nearest float32.
void round_to_float32(Tensor& t);

// Thread-local switch that disables graph recording (evaluation passes).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Builds a node for an op result. The closure is attached only when
// recording is enabled and some parent needs a gradient.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward_fn);

// Backpropagates from a scalar loss. Leaves that require grad accumulate
// d(loss)/d(leaf). The interior of the graph is released afterwards.
void backward(const Tensor& loss);

}  // namespace xferlab::grad
