// Naive one-output-element-at-a-time versions of the kernels in kernels.cpp.

#include <cstddef>

#include "owas/kernels.hpp"

namespace owas::kernels::reference {

namespace {

std::size_t idx3(int a, int b, int c, int B, int C) {
  return (static_cast<std::size_t>(a) * B + b) * C + c;
}

std::size_t idx4(int a, int b, int c, int d, int B, int C, int D) {
  return ((static_cast<std::size_t>(a) * B + b) * C + c) * D + d;
}

}  // namespace

void channel_mix_forward(std::span<const double> x, std::span<const double> w,
                         std::span<const double> b, std::span<double> y, ChannelMixShape s) {
  for (int n = 0; n < s.batch; ++n)
    for (int o = 0; o < s.out_channels; ++o)
      for (int p = 0; p < s.spatial; ++p) {
        double acc = b.empty() ? 0.0 : b[o];
        for (int i = 0; i < s.in_channels; ++i)
          acc += w[idx3(0, o, i, s.out_channels, s.in_channels)] *
                 x[idx3(n, i, p, s.in_channels, s.spatial)];
        y[idx3(n, o, p, s.out_channels, s.spatial)] = acc;
      }
}

void channel_mix_backward(std::span<const double> x, std::span<const double> w,
                          std::span<const double> dy, std::span<double> dx,
                          std::span<double> dw, std::span<double> db, ChannelMixShape s) {
  for (int n = 0; n < s.batch; ++n)
    for (int i = 0; i < s.in_channels; ++i)
      for (int p = 0; p < s.spatial; ++p) {
        double acc = 0.0;
        for (int o = 0; o < s.out_channels; ++o)
          acc += w[idx3(0, o, i, s.out_channels, s.in_channels)] *
                 dy[idx3(n, o, p, s.out_channels, s.spatial)];
        dx[idx3(n, i, p, s.in_channels, s.spatial)] = acc;
      }
  for (int o = 0; o < s.out_channels; ++o)
    for (int i = 0; i < s.in_channels; ++i) {
      double acc = 0.0;
      for (int n = 0; n < s.batch; ++n)
        for (int p = 0; p < s.spatial; ++p)
          acc += dy[idx3(n, o, p, s.out_channels, s.spatial)] *
                 x[idx3(n, i, p, s.in_channels, s.spatial)];
      dw[idx3(0, o, i, s.out_channels, s.in_channels)] = acc;
    }
  if (db.empty()) return;
  for (int o = 0; o < s.out_channels; ++o) {
    double acc = 0.0;
    for (int n = 0; n < s.batch; ++n)
      for (int p = 0; p < s.spatial; ++p) acc += dy[idx3(n, o, p, s.out_channels, s.spatial)];
    db[o] = acc;
  }
}

void temporal_conv_forward(std::span<const double> x, std::span<const double> w,
                           std::span<const double> b, std::span<double> y, TemporalConvShape s) {
  for (int n = 0; n < s.batch; ++n)
    for (int o = 0; o < s.out_channels; ++o)
      for (int t = 0; t < s.out_frames; ++t)
        for (int v = 0; v < s.joints; ++v) {
          double acc = b.empty() ? 0.0 : b[o];
          for (int i = 0; i < s.in_channels; ++i)
            for (int k = 0; k < s.kernel; ++k) {
              const int src = t * s.stride + k - s.pad;
              if (src < 0 || src >= s.in_frames) continue;
              acc += w[idx3(o, i, k, s.in_channels, s.kernel)] *
                     x[idx4(n, i, src, v, s.in_channels, s.in_frames, s.joints)];
            }
          y[idx4(n, o, t, v, s.out_channels, s.out_frames, s.joints)] = acc;
        }
}

void temporal_conv_backward(std::span<const double> x, std::span<const double> w,
                            std::span<const double> dy, std::span<double> dx,
                            std::span<double> dw, std::span<double> db, TemporalConvShape s) {
  for (int n = 0; n < s.batch; ++n)
    for (int i = 0; i < s.in_channels; ++i)
      for (int tau = 0; tau < s.in_frames; ++tau)
        for (int v = 0; v < s.joints; ++v) {
          double acc = 0.0;
          for (int o = 0; o < s.out_channels; ++o)
            for (int k = 0; k < s.kernel; ++k) {
              const int num = tau - k + s.pad;
              if (num < 0 || num % s.stride != 0) continue;
              const int t = num / s.stride;
              if (t >= s.out_frames) continue;
              acc += w[idx3(o, i, k, s.in_channels, s.kernel)] *
                     dy[idx4(n, o, t, v, s.out_channels, s.out_frames, s.joints)];
            }
          dx[idx4(n, i, tau, v, s.in_channels, s.in_frames, s.joints)] = acc;
        }
  for (int o = 0; o < s.out_channels; ++o)
    for (int i = 0; i < s.in_channels; ++i)
      for (int k = 0; k < s.kernel; ++k) {
        double acc = 0.0;
        for (int n = 0; n < s.batch; ++n)
          for (int t = 0; t < s.out_frames; ++t) {
            const int src = t * s.stride + k - s.pad;
            if (src < 0 || src >= s.in_frames) continue;
            for (int v = 0; v < s.joints; ++v)
              acc += dy[idx4(n, o, t, v, s.out_channels, s.out_frames, s.joints)] *
                     x[idx4(n, i, src, v, s.in_channels, s.in_frames, s.joints)];
          }
        dw[idx3(o, i, k, s.in_channels, s.kernel)] = acc;
      }
  if (db.empty()) return;
  for (int o = 0; o < s.out_channels; ++o) {
    double acc = 0.0;
    for (int n = 0; n < s.batch; ++n)
      for (int t = 0; t < s.out_frames; ++t)
        for (int v = 0; v < s.joints; ++v)
          acc += dy[idx4(n, o, t, v, s.out_channels, s.out_frames, s.joints)];
    db[o] = acc;
  }
}

void graph_mix_forward(std::span<const double> x, std::span<const double> adjacency,
                       std::span<double> y, GraphMixShape s) {
  for (int p = 0; p < s.planes; ++p)
    for (int v = 0; v < s.joints; ++v) {
      double acc = 0.0;
      for (int u = 0; u < s.joints; ++u)
        acc += adjacency[idx3(0, v, u, s.joints, s.joints)] * x[idx3(0, p, u, s.planes, s.joints)];
      y[idx3(0, p, v, s.planes, s.joints)] = acc;
    }
}

void graph_mix_backward(std::span<const double> adjacency, std::span<const double> dy,
                        std::span<double> dx, GraphMixShape s) {
  for (int p = 0; p < s.planes; ++p)
    for (int u = 0; u < s.joints; ++u) {
      double acc = 0.0;
      for (int v = 0; v < s.joints; ++v)
        acc += adjacency[idx3(0, v, u, s.joints, s.joints)] * dy[idx3(0, p, v, s.planes, s.joints)];
      dx[idx3(0, p, u, s.planes, s.joints)] = acc;
    }
}

}  // namespace owas::kernels::reference
