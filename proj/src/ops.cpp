#include <algorithm>
#include <cmath>
#include <limits>

#include "polymp/error.hpp"
#include "polymp/kernels.hpp"
#include "polymp/tensor.hpp"

namespace polymp::ops {

namespace kn = kernels::parallel;

namespace {

using Inputs = std::vector<Tensor>;

void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) fail(code, what);
}

void require_matrix(const Tensor& t, const char* op) {
  require(t.defined() && t.rank() == 2, ErrorCode::ShapeMismatch,
          std::string(op) + ": expected a matrix, got " +
              (t.defined() ? shape_string(t.shape()) : std::string("undefined")));
}

// Row-vector broadcast: b is [n] or [1 x n] against a [m x n].
bool is_row_broadcast(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2) return false;
  const std::size_t n = a.dim(1);
  return (b.rank() == 1 && b.dim(0) == n) || (b.rank() == 2 && b.dim(0) == 1 && b.dim(1) == n);
}

Tensor add_sub(const Tensor& a, const Tensor& b, double sign, const char* op) {
  const bool same = a.shape() == b.shape();
  const bool bcast = !same && is_row_broadcast(a, b);
  require(same || bcast, ErrorCode::ShapeMismatch,
          std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
              shape_string(b.shape()));
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  const std::size_t n = bd.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += sign * bd[same ? i : i % n];
  return make_op_result(op, a.shape(), std::move(out), {a, b},
                        [sign, same](std::span<const double> g, Inputs& in) {
                          if (in[0].requires_grad()) {
                            auto ga = in[0].mutable_grad();
                            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                          }
                          if (in[1].requires_grad()) {
                            auto gb = in[1].mutable_grad();
                            const std::size_t n = gb.size();
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              gb[same ? i : i % n] += sign * g[i];
                            }
                          }
                        });
}

void check_segments(std::span<const std::uint32_t> seg, std::size_t n_seg, const char* op) {
  for (std::uint32_t s : seg) {
    require(s < n_seg, ErrorCode::IndexOutOfRange,
            std::string(op) + ": segment id " + std::to_string(s) + " >= " + std::to_string(n_seg));
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  require(b.dim(0) == k, ErrorCode::ShapeMismatch,
          "matmul: inner dimensions differ " + shape_string(a.shape()) + " x " +
              shape_string(b.shape()));
  std::vector<double> out(m * n, 0.0);
  kn::matmul_acc(a.data(), b.data(), out, m, k, n);
  return make_op_result("matmul", {m, n}, std::move(out), {a, b},
                        [m, k, n](std::span<const double> g, Inputs& in) {
                          if (in[0].requires_grad()) {
                            kn::matmul_a_bt_acc(g, in[1].data(), in[0].mutable_grad(), m, k, n);
                          }
                          if (in[1].requires_grad()) {
                            kn::matmul_at_b_acc(in[0].data(), g, in[1].mutable_grad(), m, k, n);
                          }
                        });
}

Tensor add(const Tensor& a, const Tensor& b) { return add_sub(a, b, 1.0, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return add_sub(a, b, -1.0, "sub"); }

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), ErrorCode::ShapeMismatch,
          "mul: shapes differ " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_op_result("mul", a.shape(), std::move(out), {a, b},
                        [](std::span<const double> g, Inputs& in) {
                          for (int side = 0; side < 2; ++side) {
                            if (!in[side].requires_grad()) continue;
                            auto gx = in[side].mutable_grad();
                            const auto other = in[1 - side].data();
                            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * other[i];
                          }
                        });
}

Tensor mul_scalar(const Tensor& a, double s) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v *= s;
  return make_op_result("mul_scalar", a.shape(), std::move(out), {a},
                        [s](std::span<const double> g, Inputs& in) {
                          auto gx = in[0].mutable_grad();
                          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += s * g[i];
                        });
}

Tensor abs(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(a.data()[i]);
  return make_op_result("abs", a.shape(), std::move(out), {a},
                        [](std::span<const double> g, Inputs& in) {
                          auto gx = in[0].mutable_grad();
                          const auto x = in[0].data();
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            if (x[i] > 0.0) gx[i] += g[i];
                            else if (x[i] < 0.0) gx[i] -= g[i];
                          }
                        });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(a.data()[i], 0.0);
  return make_op_result("relu", a.shape(), std::move(out), {a},
                        [](std::span<const double> g, Inputs& in) {
                          auto gx = in[0].mutable_grad();
                          const auto x = in[0].data();
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            if (x[i] > 0.0) gx[i] += g[i];
                          }
                        });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_matrix(a, "concat_cols");
  require_matrix(b, "concat_cols");
  require(a.dim(0) == b.dim(0), ErrorCode::ShapeMismatch, "concat_cols: row counts differ");
  const std::size_t m = a.dim(0), p = a.dim(1), q = b.dim(1);
  std::vector<double> out(m * (p + q));
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(i * p), p, out.begin() + static_cast<std::ptrdiff_t>(i * (p + q)));
    std::copy_n(b.data().begin() + static_cast<std::ptrdiff_t>(i * q), q,
                out.begin() + static_cast<std::ptrdiff_t>(i * (p + q) + p));
  }
  return make_op_result("concat_cols", {m, p + q}, std::move(out), {a, b},
                        [m, p, q](std::span<const double> g, Inputs& in) {
                          if (in[0].requires_grad()) {
                            auto ga = in[0].mutable_grad();
                            for (std::size_t i = 0; i < m; ++i)
                              for (std::size_t c = 0; c < p; ++c) ga[i * p + c] += g[i * (p + q) + c];
                          }
                          if (in[1].requires_grad()) {
                            auto gb = in[1].mutable_grad();
                            for (std::size_t i = 0; i < m; ++i)
                              for (std::size_t c = 0; c < q; ++c) gb[i * q + c] += g[i * (p + q) + p + c];
                          }
                        });
}

Tensor reshape(const Tensor& a, Shape shape) {
  require(shape_numel(shape) == a.numel(), ErrorCode::ShapeMismatch,
          "reshape: " + shape_string(a.shape()) + " -> " + shape_string(shape));
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_op_result("reshape", std::move(shape), std::move(out), {a},
                        [](std::span<const double> g, Inputs& in) {
                          auto gx = in[0].mutable_grad();
                          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                        });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make_op_result("sum", {}, {s}, {a}, [](std::span<const double> g, Inputs& in) {
    auto gx = in[0].mutable_grad();
    for (double& v : gx) v += g[0];
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::uint32_t> idx) {
  require_matrix(x, "gather_rows");
  const std::size_t n = x.dim(0), d = x.dim(1);
  for (std::uint32_t i : idx) {
    require(i < n, ErrorCode::IndexOutOfRange,
            "gather_rows: index " + std::to_string(i) + " >= " + std::to_string(n));
  }
  std::vector<std::uint32_t> index(idx.begin(), idx.end());
  const std::size_t m = index.size();
  std::vector<double> out(m * d);
  kn::gather_rows(x.data(), index, d, out);
  return make_op_result("gather_rows", {m, d}, std::move(out), {x},
                        [index = std::move(index), n, d](std::span<const double> g, Inputs& in) {
                          const auto inverse = kernels::build_segment_index(index, n);
                          kn::scatter_add_rows(g, inverse, d, in[0].mutable_grad());
                        });
}

Tensor scale_rows(const Tensor& x, std::span<const double> w) {
  require_matrix(x, "scale_rows");
  const std::size_t m = x.dim(0), d = x.dim(1);
  require(w.size() == m, ErrorCode::ShapeMismatch, "scale_rows: weight count != rows");
  std::vector<double> weights(w.begin(), w.end());
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t c = 0; c < d; ++c) out[i * d + c] *= weights[i];
  return make_op_result("scale_rows", x.shape(), std::move(out), {x},
                        [weights = std::move(weights), d](std::span<const double> g, Inputs& in) {
                          auto gx = in[0].mutable_grad();
                          for (std::size_t i = 0; i < weights.size(); ++i)
                            for (std::size_t c = 0; c < d; ++c) gx[i * d + c] += weights[i] * g[i * d + c];
                        });
}

Tensor segment_reduce(const Tensor& x, std::span<const std::uint32_t> seg, std::size_t n_seg,
                      Reduce mode) {
  require_matrix(x, "segment_reduce");
  const std::size_t m = x.dim(0), d = x.dim(1);
  require(seg.size() == m, ErrorCode::ShapeMismatch, "segment_reduce: seg length != rows");
  check_segments(seg, n_seg, "segment_reduce");
  auto index = std::make_shared<const kernels::SegmentIndex>(kernels::build_segment_index(seg, n_seg));
  std::vector<double> out(n_seg * d);
  if (mode == Reduce::Max) {
    auto argmax = std::make_shared<std::vector<std::int64_t>>(n_seg * d);
    kn::segment_max(x.data(), *index, d, out, *argmax);
    return make_op_result("segment_max", {n_seg, d}, std::move(out), {x},
                          [argmax, n_seg, d](std::span<const double> g, Inputs& in) {
                            kn::segment_max_backward(g, *argmax, n_seg, d, in[0].mutable_grad());
                          });
  }
  const bool mean = mode == Reduce::Mean;
  kn::segment_sum(x.data(), *index, d, mean, out);
  return make_op_result(mean ? "segment_mean" : "segment_sum", {n_seg, d}, std::move(out), {x},
                        [index, mean, d](std::span<const double> g, Inputs& in) {
                          kn::segment_sum_backward(g, *index, d, mean, in[0].mutable_grad());
                        });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_matrix(logits, "softmax_cross_entropy");
  const std::size_t b = logits.dim(0), c = logits.dim(1);
  require(labels.size() == b, ErrorCode::ShapeMismatch, "softmax_cross_entropy: label count != rows");
  require(b > 0, ErrorCode::ShapeMismatch, "softmax_cross_entropy: empty batch");
  std::vector<double> probs(b * c);
  double loss = 0.0;
  const auto z = logits.data();
  for (std::size_t i = 0; i < b; ++i) {
    const int label = labels[i];
    require(label >= 0 && static_cast<std::size_t>(label) < c, ErrorCode::IndexOutOfRange,
            "softmax_cross_entropy: label " + std::to_string(label) + " out of range");
    const double* zi = z.data() + i * c;
    const double zmax = *std::max_element(zi, zi + c);
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) denom += std::exp(zi[j] - zmax);
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(zi[j] - zmax) / denom;
    loss += std::log(denom) - (zi[label] - zmax);
  }
  loss /= static_cast<double>(b);
  std::vector<int> targets(labels.begin(), labels.end());
  return make_op_result("softmax_cross_entropy", {}, {loss}, {logits},
                        [probs = std::move(probs), targets = std::move(targets), b, c](
                            std::span<const double> g, Inputs& in) {
                          auto gx = in[0].mutable_grad();
                          const double scale = g[0] / static_cast<double>(b);
                          for (std::size_t i = 0; i < b; ++i) {
                            for (std::size_t j = 0; j < c; ++j) {
                              const double onehot = static_cast<int>(j) == targets[i] ? 1.0 : 0.0;
                              gx[i * c + j] += scale * (probs[i * c + j] - onehot);
                            }
                          }
                        });
}

Tensor conv1d(const Tensor& x, const Tensor& kernel) {
  require(x.defined() && x.rank() == 3, ErrorCode::ShapeMismatch, "conv1d: input must be [b x L x d]");
  require(kernel.defined() && kernel.rank() == 3, ErrorCode::ShapeMismatch,
          "conv1d: kernel must be [k x din x dout]");
  const std::size_t b = x.dim(0), len = x.dim(1), din = x.dim(2);
  const std::size_t k = kernel.dim(0), dout = kernel.dim(2);
  require(kernel.dim(1) == din, ErrorCode::ShapeMismatch,
          "conv1d: kernel input width " + std::to_string(kernel.dim(1)) + " != " + std::to_string(din));
  require(k % 2 == 1, ErrorCode::ShapeMismatch, "conv1d: kernel size must be odd");
  std::vector<double> out(b * len * dout);
  kn::conv1d_forward(x.data(), kernel.data(), out, b, len, din, dout, k);
  return make_op_result("conv1d", {b, len, dout}, std::move(out), {x, kernel},
                        [b, len, din, dout, k](std::span<const double> g, Inputs& in) {
                          if (in[0].requires_grad()) {
                            kn::conv1d_backward_input(g, in[1].data(), in[0].mutable_grad(), b, len,
                                                      din, dout, k);
                          }
                          if (in[1].requires_grad()) {
                            kn::conv1d_backward_kernel(in[0].data(), g, in[1].mutable_grad(), b, len,
                                                       din, dout, k);
                          }
                        });
}

}  // namespace polymp::ops
