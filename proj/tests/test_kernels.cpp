// Parallel kernels against the serial reference implementations.

#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "owas/kernels.hpp"

namespace owas::kernels {
namespace {

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// Same accumulation order on both sides, so results agree exactly.
void expect_equal(const std::vector<double>& a, const std::vector<double>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a[i], b[i]) << "index " << i;
}

TEST(Kernels, OutFrames) {
  EXPECT_EQ(temporal_conv_out_frames(16, 5, 1, 2), 16);
  EXPECT_EQ(temporal_conv_out_frames(16, 5, 2, 2), 8);
  EXPECT_EQ(temporal_conv_out_frames(8, 1, 1, 0), 8);
}

TEST(Kernels, ChannelMixMatchesReference) {
  std::mt19937_64 rng(1);
  const ChannelMixShape s{3, 5, 7, 24};
  const auto x = random_vector(3 * 5 * 24, rng), w = random_vector(35, rng), b = random_vector(7, rng);
  const auto dy = random_vector(3 * 7 * 24, rng);
  std::vector<double> y1(3 * 7 * 24), y2(y1.size());
  channel_mix_forward(x, w, b, y1, s);
  reference::channel_mix_forward(x, w, b, y2, s);
  expect_equal(y1, y2);
  std::vector<double> dx1(x.size()), dw1(w.size()), db1(b.size()), dx2(x.size()), dw2(w.size()), db2(b.size());
  channel_mix_backward(x, w, dy, dx1, dw1, db1, s);
  reference::channel_mix_backward(x, w, dy, dx2, dw2, db2, s);
  expect_equal(dx1, dx2);
  expect_equal(dw1, dw2);
  expect_equal(db1, db2);
}

TEST(Kernels, ChannelMixByHand) {
  // y[o, s] = sum_i w[o, i] x[i, s] + b[o] with one sample.
  const std::vector<double> x{1, 2, 3, 4}, w{1, 0, 2, -1}, b{0.5, -0.5};
  std::vector<double> y(4);
  channel_mix_forward(x, w, b, y, {1, 2, 2, 2});
  EXPECT_EQ(y, (std::vector<double>{1.5, 2.5, -1.5, -0.5}));
}

TEST(Kernels, TemporalConvMatchesReference) {
  std::mt19937_64 rng(2);
  for (int stride : {1, 2}) {
    const int tin = 12, tout = temporal_conv_out_frames(tin, 5, stride, 2);
    const TemporalConvShape s{2, 4, 6, tin, tout, 5, 5, stride, 2};
    const auto x = random_vector(2 * 4 * tin * 5, rng), w = random_vector(6 * 4 * 5, rng), b = random_vector(6, rng);
    const auto dy = random_vector(2 * 6 * tout * 5, rng);
    std::vector<double> y1(dy.size()), y2(dy.size());
    temporal_conv_forward(x, w, b, y1, s);
    reference::temporal_conv_forward(x, w, b, y2, s);
    expect_equal(y1, y2);
    std::vector<double> dx1(x.size()), dw1(w.size()), db1(b.size()), dx2(x.size()), dw2(w.size()), db2(b.size());
    temporal_conv_backward(x, w, dy, dx1, dw1, db1, s);
    reference::temporal_conv_backward(x, w, dy, dx2, dw2, db2, s);
    expect_equal(dx1, dx2);
    expect_equal(dw1, dw2);
    expect_equal(db1, db2);
  }
}

TEST(Kernels, GraphMixMatchesReference) {
  std::mt19937_64 rng(3);
  const GraphMixShape s{30, 6};
  const auto x = random_vector(30 * 6, rng), a = random_vector(36, rng), dy = random_vector(30 * 6, rng);
  std::vector<double> y1(x.size()), y2(x.size()), dx1(x.size()), dx2(x.size());
  graph_mix_forward(x, a, y1, s);
  reference::graph_mix_forward(x, a, y2, s);
  expect_equal(y1, y2);
  graph_mix_backward(a, dy, dx1, s);
  reference::graph_mix_backward(a, dy, dx2, s);
  expect_equal(dx1, dx2);
}

TEST(Kernels, ThreadCountIsPositive) { EXPECT_GE(max_threads(), 1); }

}  // namespace
}  // namespace owas::kernels
