#include "csireid/autodiff/tensor.hpp"

#include <stdexcept>
#include <unordered_set>

#include "csireid/error.hpp"

namespace csireid::ad {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
  return from(rows, cols, std::vector<double>(rows * cols, 0.0), requires_grad);
}

Tensor Tensor::from(std::size_t rows, std::size_t cols, std::vector<double> values,
                    bool requires_grad) {
  if (values.size() != rows * cols) throw std::invalid_argument("tensor value count != rows*cols");
  auto node = std::make_shared<detail::Node>();
  node->shape = {rows, cols};
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from(1, 1, {value}, requires_grad);
}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item() on a non-scalar tensor");
  return node_->value[0];
}

void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

Tensor Tensor::detach() const { return from(rows(), cols(), node_->value, false); }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw std::invalid_argument("backward() requires a scalar loss");
  }
  detail::Node* root = loss.node().get();
  if (root->consumed) throw std::logic_error("backward(): graph already consumed");
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first);
  // `order` keeps every node alive while parent links are released.
  std::vector<std::shared_ptr<detail::Node>> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack{{loss.node(), 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto& top = stack.back();
    if (top.second < top.first->parents.size()) {
      std::shared_ptr<detail::Node> parent = top.first->parents[top.second++];
      if (parent->requires_grad && visited.insert(parent.get()).second) {
        if (parent->consumed) throw std::logic_error("backward(): graph already consumed");
        stack.emplace_back(std::move(parent), 0);
      }
    } else {
      order.push_back(std::move(top.first));
      stack.pop_back();
    }
  }

  root->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = it->get();
    if (!node->backward) continue;  // leaf
    if (!node->grad.empty()) node->backward(*node);
    node->backward = nullptr;
    node->parents.clear();
    node->consumed = true;
    node->grad.clear();
    node->grad.shrink_to_fit();
  }
}

}  // namespace csireid::ad
