#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace wend::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  // Creation order; backward walks reachable nodes in decreasing sequence.
  std::uint64_t seq = 0;
  std::string op;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into its inputs' grads.
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

// Shared handle to a graph node. Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v) { return from({1}, {v}); }

  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->value.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }

  std::span<double> data() { return node_->value; }
  std::span<const double> data() const { return node_->value; }
  std::span<double> grad() { return node_->grad; }
  std::span<const double> grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }

  bool requires_grad() const { return node_->requires_grad; }
  double item() const;

  void zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

  Node& node() const { return *node_; }
  const std::shared_ptr<Node>& ptr() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

// ---- forward ops (each records its backward on the graph) ----

// x [N,C,H,W], w [O,C,K,K], optional b [O] -> [N,O,Ho,Wo].
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);
// x [N,In], w [Out,In], optional b [Out] -> [N,Out].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& x, double s);
Tensor mul_scalar(const Tensor& x, double s);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
// Half-open range [start, end) along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t end);
// [N,C,H,W] -> [N,H,W,C]
Tensor to_nhwc(const Tensor& x);
// [N,C,H,W] -> [N,C]
Tensor global_avg_pool(const Tensor& x);

// Scalar node whose gradient with respect to `inputs[k]` is `grads[k]` (same size as the
// input). Bridges externally computed loss values and gradients onto the graph.
Tensor external_loss(std::span<const Tensor> inputs, double value,
                     std::vector<std::vector<double>> grads);

// Populates grads of every requires_grad leaf reachable from `loss`. Leaf grads accumulate
// across calls; interior grads are recomputed.
void backward(const Tensor& loss);

}  // namespace wend::ad
