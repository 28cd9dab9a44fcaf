#pragma once

// Dense inner loops of the graph-convolution network. Every kernel has an
// OpenMP-parallel version (owas::kernels) and a naive serial version
// (owas::kernels::reference) used by the tests as an oracle and by the
// benchmark as a baseline. Parallel kernels assign each output element to a
// single thread and accumulate in a fixed order, so results do not depend on
// the thread count.
//
// Backward kernels overwrite their outputs; callers accumulate.

#include <span>

namespace owas::kernels {

/// 1x1 convolution over (N, Cin, S) -> (N, Cout, S); weight is (Cout, Cin).
struct ChannelMixShape {
  int batch;
  int in_channels;
  int out_channels;
  int spatial;
};

/// Temporal convolution over (N, Cin, Tin, V) -> (N, Cout, Tout, V); weight is
/// (Cout, Cin, K). Output frame t reads input frames t*stride + k - pad.
struct TemporalConvShape {
  int batch;
  int in_channels;
  int out_channels;
  int in_frames;
  int out_frames;
  int joints;
  int kernel;
  int stride;
  int pad;
};

/// Joint aggregation y[p, v] = sum_u A[v, u] x[p, u] over `planes` rows.
struct GraphMixShape {
  int planes;
  int joints;
};

int temporal_conv_out_frames(int in_frames, int kernel, int stride, int pad);

void channel_mix_forward(std::span<const double> x, std::span<const double> w,
                         std::span<const double> b, std::span<double> y, ChannelMixShape s);
void channel_mix_backward(std::span<const double> x, std::span<const double> w,
                          std::span<const double> dy, std::span<double> dx,
                          std::span<double> dw, std::span<double> db, ChannelMixShape s);

void temporal_conv_forward(std::span<const double> x, std::span<const double> w,
                           std::span<const double> b, std::span<double> y, TemporalConvShape s);
void temporal_conv_backward(std::span<const double> x, std::span<const double> w,
                            std::span<const double> dy, std::span<double> dx,
                            std::span<double> dw, std::span<double> db, TemporalConvShape s);

void graph_mix_forward(std::span<const double> x, std::span<const double> adjacency,
                       std::span<double> y, GraphMixShape s);
void graph_mix_backward(std::span<const double> adjacency, std::span<const double> dy,
                        std::span<double> dx, GraphMixShape s);

namespace reference {

void channel_mix_forward(std::span<const double> x, std::span<const double> w,
                         std::span<const double> b, std::span<double> y, ChannelMixShape s);
void channel_mix_backward(std::span<const double> x, std::span<const double> w,
                          std::span<const double> dy, std::span<double> dx,
                          std::span<double> dw, std::span<double> db, ChannelMixShape s);

void temporal_conv_forward(std::span<const double> x, std::span<const double> w,
                           std::span<const double> b, std::span<double> y, TemporalConvShape s);
void temporal_conv_backward(std::span<const double> x, std::span<const double> w,
                            std::span<const double> dy, std::span<double> dx,
                            std::span<double> dw, std::span<double> db, TemporalConvShape s);

void graph_mix_forward(std::span<const double> x, std::span<const double> adjacency,
                       std::span<double> y, GraphMixShape s);
void graph_mix_backward(std::span<const double> adjacency, std::span<const double> dy,
                        std::span<double> dx, GraphMixShape s);

}  // namespace reference

/// Number of threads the parallel kernels will use (1 without OpenMP).
int max_threads();

}  // namespace owas::kernels
