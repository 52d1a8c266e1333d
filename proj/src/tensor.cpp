#include "polymp/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <unordered_set>

#include "polymp/error.hpp"

namespace polymp {

namespace {

std::atomic<std::uint64_t> g_next_seq{1};
thread_local bool t_grad_enabled = true;

int read_nan_check_env() {
  const char* v = std::getenv("POLY_NAN_CHECK");
  return (v != nullptr && std::string(v) == "1") ? 1 : 0;
}

std::atomic<int> g_nan_check{read_nan_check_env()};

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) s += 'x';
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    fail(ErrorCode::ShapeMismatch, "data length " + std::to_string(data.size()) +
                                       " does not match shape " + shape_string(shape));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

double Tensor::item() const {
  if (numel() != 1) fail(ErrorCode::NotScalar, "item() on tensor of shape " + shape_string(shape()));
  return impl_->data[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  return impl_->data.at(row * impl_->shape.back() + col);
}

std::span<double> Tensor::mutable_grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

Tensor Tensor::clone() const { return from(shape(), impl_->data, requires_grad()); }

Tensor Tensor::detach() const { return from(shape(), impl_->data, false); }

Tensor make_op_result(const char* op, Shape shape, std::vector<double> data,
                      std::vector<Tensor> inputs,
                      std::function<void(std::span<const double>, std::vector<Tensor>&)> backward) {
  if (g_nan_check.load(std::memory_order_relaxed) != 0) {
    for (double v : data) {
      if (!std::isfinite(v)) fail(ErrorCode::NanDetected, std::string("non-finite output of ") + op);
    }
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  const bool record = t_grad_enabled && std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) {
                        return t.requires_grad();
                      });
  if (record) {
    impl->requires_grad = true;
    auto node = std::make_shared<TapeNode>();
    node->op = op;
    node->seq = g_next_seq.fetch_add(1, std::memory_order_relaxed);
    node->inputs = std::move(inputs);
    node->output = impl;
    node->backward = std::move(backward);
    impl->producer = std::move(node);
  }
  return Tensor(std::move(impl));
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    fail(ErrorCode::NotScalar, "backward() needs a scalar loss");
  }
  const auto& root = loss.producer();
  if (!root) {
    if (loss.requires_grad()) {
      Tensor leaf = loss;
      leaf.mutable_grad()[0] += 1.0;
    }
    return;
  }
  if (root->consumed) fail(ErrorCode::TapeConsumed, "backward() already ran on this graph");

  // Owning references keep every node alive until the release loop finishes.
  std::vector<std::shared_ptr<TapeNode>> nodes;
  std::unordered_set<const TapeNode*> seen;
  std::vector<std::shared_ptr<TapeNode>> stack{root};
  seen.insert(root.get());
  while (!stack.empty()) {
    std::shared_ptr<TapeNode> node = std::move(stack.back());
    stack.pop_back();
    if (node->consumed) fail(ErrorCode::TapeConsumed, "graph shares nodes with a consumed backward pass");
    for (const Tensor& in : node->inputs) {
      const auto& p = in.producer();
      if (p && seen.insert(p.get()).second) stack.push_back(p);
    }
    nodes.push_back(std::move(node));
  }
  std::sort(nodes.begin(), nodes.end(),
            [](const auto& a, const auto& b) { return a->seq > b->seq; });

  Tensor seed = loss;
  seed.mutable_grad()[0] += 1.0;
  for (const auto& node : nodes) {
    auto out = node->output.lock();
    if (out && !out->grad.empty()) node->backward(out->grad, node->inputs);
  }
  // Free saved activations; the graph cannot be replayed.
  for (const auto& node : nodes) {
    node->consumed = true;
    node->backward = nullptr;
    node->inputs.clear();
  }
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool grad_enabled() { return t_grad_enabled; }

bool nan_check_enabled() { return g_nan_check.load() != 0; }
void set_nan_check(bool enabled) { g_nan_check.store(enabled ? 1 : 0); }

}  // namespace polymp
