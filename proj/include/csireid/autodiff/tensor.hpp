#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace csireid::ad {

/// Every tensor is a dense row-major matrix; vectors are 1 x n and scalars
/// are 1 x 1.
struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  [[nodiscard]] std::size_t size() const { return rows * cols; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

namespace detail {

struct Node {
  Shape shape{};
  std::vector<double> value{};
  std::vector<double> grad{};  // empty until something flows into it
  bool requires_grad = false;
  bool consumed = false;
  std::vector<std::shared_ptr<Node>> parents{};
  std::function<void(Node&)> backward{};

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Handle to a node of the reverse-mode tape. Copies share the node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
  static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  [[nodiscard]] bool defined() const { return node_ != nullptr; }
  [[nodiscard]] Shape shape() const { return node_->shape; }
  [[nodiscard]] std::size_t rows() const { return node_->shape.rows; }
  [[nodiscard]] std::size_t cols() const { return node_->shape.cols; }
  [[nodiscard]] std::size_t size() const { return node_->value.size(); }

  [[nodiscard]] std::span<const double> values() const { return node_->value; }
  /// Mutable access is meant for leaves (parameters, inputs).
  [[nodiscard]] std::span<double> values() { return node_->value; }
  [[nodiscard]] double at(std::size_t r, std::size_t c) const {
    return node_->value[r * node_->shape.cols + c];
  }
  [[nodiscard]] double item() const;

  [[nodiscard]] bool has_grad() const { return !node_->grad.empty(); }
  /// Accumulated gradient; empty span if none has been populated.
  [[nodiscard]] std::span<const double> grad() const { return node_->grad; }
  /// Fills the gradient buffer with zeros (allocating it).
  void zero_grad();
  /// Drops the gradient buffer.
  void clear_grad() { node_->grad.clear(); }

  [[nodiscard]] bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  /// Detached copy of the values (a new leaf).
  [[nodiscard]] Tensor detach() const;

  [[nodiscard]] const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_{};
};

/// True unless a NoGradGuard is active on this thread.
bool grad_enabled();

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Reverse pass from a scalar. Accumulates into every reachable leaf that
/// requires grad and consumes the graph.
void backward(const Tensor& loss);

}  // namespace csireid::ad
