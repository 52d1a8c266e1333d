#include <gtest/gtest.h>

#include <omp.h>

#include <random>

#include "polymp/kernels.hpp"

using namespace polymp::kernels;

namespace {

std::vector<double> randn(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

std::vector<std::uint32_t> random_segments(std::size_t m, std::size_t n_seg, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint32_t> d(0, static_cast<std::uint32_t>(n_seg - 1));
  std::vector<std::uint32_t> s(m);
  for (auto& x : s) x = d(rng);
  return s;
}

class KernelsTest : public ::testing::Test {
 protected:
  void SetUp() override {
    saved_ = omp_get_max_threads();
    omp_set_num_threads(4);
  }
  void TearDown() override { omp_set_num_threads(saved_); }
  int saved_ = 1;
  std::mt19937_64 rng{21};
};

}  // namespace

TEST_F(KernelsTest, SegmentIndexIsStableCountingSort) {
  const std::vector<std::uint32_t> seg = {2, 0, 2, 1, 0, 2};
  const SegmentIndex idx = build_segment_index(seg, 4);
  EXPECT_EQ(idx.offsets, (std::vector<std::size_t>{0, 2, 3, 6, 6}));
  EXPECT_EQ(idx.order, (std::vector<std::uint32_t>{1, 4, 3, 0, 2, 5}));
}

TEST_F(KernelsTest, MatmulMatchesNaiveAndParallelIsBitwiseEqual) {
  const std::size_t m = 37, k = 19, n = 23;
  const auto a = randn(m * k, rng), b = randn(k * n, rng), g = randn(m * n, rng);
  std::vector<double> cs(m * n, 0.0), cp(m * n, 0.0);
  serial::matmul_acc(a, b, cs, m, k, n);
  parallel::matmul_acc(a, b, cp, m, k, n);
  EXPECT_EQ(cs, cp);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      EXPECT_NEAR(cs[i * n + j], s, 1e-12);
    }
  }
  std::vector<double> ks(k * n, 0.0), kp(k * n, 0.0);
  serial::matmul_at_b_acc(a, g, ks, m, k, n);
  parallel::matmul_at_b_acc(a, g, kp, m, k, n);
  EXPECT_EQ(ks, kp);
  std::vector<double> ms(m * k, 0.0), mp(m * k, 0.0);
  serial::matmul_a_bt_acc(g, b, ms, m, k, n);
  parallel::matmul_a_bt_acc(g, b, mp, m, k, n);
  EXPECT_EQ(ms, mp);
  for (std::size_t p = 0; p < k; ++p) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += a[i * k + p] * g[i * n + 0];
    EXPECT_NEAR(ks[p * n], s, 1e-12);
  }
}

TEST_F(KernelsTest, SegmentReductionsAgree) {
  const std::size_t m = 101, d = 7, n_seg = 13;
  const auto x = randn(m * d, rng), g = randn(n_seg * d, rng);
  const auto seg = random_segments(m, n_seg - 1, rng);  // last segment stays empty
  const SegmentIndex idx = build_segment_index(seg, n_seg);
  for (bool mean : {false, true}) {
    std::vector<double> os(n_seg * d), op(n_seg * d);
    serial::segment_sum(x, idx, d, mean, os);
    parallel::segment_sum(x, idx, d, mean, op);
    EXPECT_EQ(os, op);
    for (std::size_t c = 0; c < d; ++c) EXPECT_EQ(os[(n_seg - 1) * d + c], 0.0);
    std::vector<double> gs(m * d, 0.0), gp(m * d, 0.0);
    serial::segment_sum_backward(g, idx, d, mean, gs);
    parallel::segment_sum_backward(g, idx, d, mean, gp);
    EXPECT_EQ(gs, gp);
  }
  std::vector<double> ms(n_seg * d), mp(n_seg * d);
  std::vector<std::int64_t> as(n_seg * d), ap(n_seg * d);
  serial::segment_max(x, idx, d, ms, as);
  parallel::segment_max(x, idx, d, mp, ap);
  EXPECT_EQ(ms, mp);
  EXPECT_EQ(as, ap);
  EXPECT_EQ(as[(n_seg - 1) * d], -1);
  for (std::size_t s = 0; s + 1 < n_seg; ++s) {
    for (std::size_t c = 0; c < d; ++c) {
      double best = -1e300;
      for (std::size_t r = 0; r < m; ++r) {
        if (seg[r] == s) best = std::max(best, x[r * d + c]);
      }
      if (best > -1e300) EXPECT_EQ(ms[s * d + c], best);
    }
  }
  std::vector<double> gs(m * d, 0.0), gp(m * d, 0.0);
  serial::segment_max_backward(g, as, n_seg, d, gs);
  parallel::segment_max_backward(g, ap, n_seg, d, gp);
  EXPECT_EQ(gs, gp);
}

TEST_F(KernelsTest, SegmentMaxTiesGoToFirstRow) {
  const std::vector<double> x = {1.0, 5.0, 5.0, 2.0};
  const std::vector<std::uint32_t> seg = {0, 0, 0, 0};
  const SegmentIndex idx = build_segment_index(seg, 1);
  std::vector<double> out(1);
  std::vector<std::int64_t> arg(1);
  serial::segment_max(x, idx, 1, out, arg);
  EXPECT_EQ(out[0], 5.0);
  EXPECT_EQ(arg[0], 1);
}

TEST_F(KernelsTest, GatherScatterAgree) {
  const std::size_t n = 40, d = 5, m = 90;
  const auto x = randn(n * d, rng), g = randn(m * d, rng);
  const auto idx = random_segments(m, n, rng);
  std::vector<double> os(m * d), op(m * d);
  serial::gather_rows(x, idx, d, os);
  parallel::gather_rows(x, idx, d, op);
  EXPECT_EQ(os, op);
  for (std::size_t i = 0; i < m; ++i) EXPECT_EQ(os[i * d + 2], x[idx[i] * d + 2]);
  const SegmentIndex inv = build_segment_index(idx, n);
  std::vector<double> ss(n * d, 0.0), sp(n * d, 0.0);
  serial::scatter_add_rows(g, inv, d, ss);
  parallel::scatter_add_rows(g, inv, d, sp);
  EXPECT_EQ(ss, sp);
}

TEST_F(KernelsTest, Conv1dMatchesNaiveAndAgrees) {
  const std::size_t b = 3, len = 17, din = 4, dout = 6, k = 3;
  const auto x = randn(b * len * din, rng), w = randn(k * din * dout, rng), gy = randn(b * len * dout, rng);
  std::vector<double> ys(b * len * dout, 0.0), yp(b * len * dout, 0.0);
  serial::conv1d_forward(x, w, ys, b, len, din, dout, k);
  parallel::conv1d_forward(x, w, yp, b, len, din, dout, k);
  EXPECT_EQ(ys, yp);
  const long half = static_cast<long>(k / 2);
  for (std::size_t bi = 0; bi < b; ++bi) {
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t o = 0; o < dout; ++o) {
        double s = 0.0;
        for (std::size_t q = 0; q < k; ++q) {
          const long src = static_cast<long>(t) + static_cast<long>(q) - half;
          if (src < 0 || src >= static_cast<long>(len)) continue;
          for (std::size_t c = 0; c < din; ++c) {
            s += x[(bi * len + static_cast<std::size_t>(src)) * din + c] * w[(q * din + c) * dout + o];
          }
        }
        EXPECT_NEAR(ys[(bi * len + t) * dout + o], s, 1e-12);
      }
    }
  }
  std::vector<double> gxs(x.size(), 0.0), gxp(x.size(), 0.0), gws(w.size(), 0.0), gwp(w.size(), 0.0);
  serial::conv1d_backward_input(gy, w, gxs, b, len, din, dout, k);
  parallel::conv1d_backward_input(gy, w, gxp, b, len, din, dout, k);
  serial::conv1d_backward_kernel(x, gy, gws, b, len, din, dout, k);
  parallel::conv1d_backward_kernel(x, gy, gwp, b, len, din, dout, k);
  EXPECT_EQ(gxs, gxp);
  EXPECT_EQ(gws, gwp);
}
