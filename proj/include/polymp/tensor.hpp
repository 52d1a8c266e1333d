#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace polymp {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tensor;
struct TapeNode;

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a backward pass reaches this tensor
  bool requires_grad = false;
  std::shared_ptr<TapeNode> producer;  // null for leaves
};

// Shared handle to a dense row-major array of doubles. Copies alias the same
// storage; use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const double> data() const { return impl_->data; }
  std::span<double> mutable_data() { return impl_->data; }
  double item() const;
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool flag) { impl_->requires_grad = flag; }
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  std::span<double> mutable_grad();  // allocates zeros on first use
  void zero_grad() { impl_->grad.clear(); }

  // Deep copy of values; the copy is a leaf with the same requires_grad flag.
  Tensor clone() const;
  // Shares nothing with the tape: a constant copy of the values.
  Tensor detach() const;

  const std::shared_ptr<TapeNode>& producer() const { return impl_->producer; }
  TensorImpl* impl() const noexcept { return impl_.get(); }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  friend Tensor make_op_result(const char*, Shape, std::vector<double>, std::vector<Tensor>,
                               std::function<void(std::span<const double>, std::vector<Tensor>&)>);

  std::shared_ptr<TensorImpl> impl_;
};

// One recorded operation. Sequence numbers increase with creation, so sorting
// by descending `seq` gives a valid reverse topological order.
struct TapeNode {
  const char* op = "";
  std::uint64_t seq = 0;
  std::vector<Tensor> inputs;
  std::weak_ptr<TensorImpl> output;
  // Receives d(loss)/d(output) and accumulates into the inputs' grads.
  std::function<void(std::span<const double>, std::vector<Tensor>&)> backward;
  bool consumed = false;
};

// Builds an op result and records it when any input requires grad and
// recording is enabled on this thread.
Tensor make_op_result(const char* op, Shape shape, std::vector<double> data,
                      std::vector<Tensor> inputs,
                      std::function<void(std::span<const double>, std::vector<Tensor>&)> backward);

// Populates grads of every requires_grad tensor reachable from `loss`, then
// releases the recorded graph. Throws NotScalar, TapeConsumed.
void backward(const Tensor& loss);

// Disables recording on the current thread for its lifetime.
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

// Per-op finiteness assertion, on when POLY_NAN_CHECK=1 (or forced here).
bool nan_check_enabled();
void set_nan_check(bool enabled);

namespace ops {

enum class Reduce { Sum, Mean, Max };

Tensor matmul(const Tensor& a, const Tensor& b);
// b may equal a's shape or be a row vector [n] / [1 x n] broadcast over rows.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise, equal shapes
Tensor mul_scalar(const Tensor& a, double s);
Tensor abs(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor reshape(const Tensor& a, Shape shape);
Tensor sum(const Tensor& a);  // scalar
// Row i of the result is x[idx[i]]; x is [n x d].
Tensor gather_rows(const Tensor& x, std::span<const std::uint32_t> idx);
// Row i multiplied by the constant weight w[i].
Tensor scale_rows(const Tensor& x, std::span<const double> w);
Tensor segment_reduce(const Tensor& x, std::span<const std::uint32_t> seg, std::size_t n_seg,
                      Reduce mode);
// Mean over the batch of -log softmax(logits)[label].
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);
// x [b x L x din], kernel [k x din x dout], stride 1, zero same-padding, k odd.
Tensor conv1d(const Tensor& x, const Tensor& kernel);

}  // namespace ops

}  // namespace polymp
