// OpenMP kernels against their serial reference versions at encoder-sized shapes.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "owas/kernels.hpp"

namespace {

using namespace owas::kernels;

std::vector<double> random_vector(std::size_t n) {
  std::mt19937_64 rng(n);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// Batch 4, 64 frames, 8 joints; channels from the range argument.
TemporalConvShape conv_shape(int channels) {
  return {4, channels, channels, 64, 64, 8, 5, 1, 2};
}

template <bool Parallel>
void BM_TemporalConvForward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const TemporalConvShape s = conv_shape(c);
  const auto x = random_vector(static_cast<std::size_t>(4) * c * 64 * 8), w = random_vector(static_cast<std::size_t>(c) * c * 5),
             b = random_vector(static_cast<std::size_t>(c));
  std::vector<double> y(x.size());
  for (auto _ : state) {
    if constexpr (Parallel)
      temporal_conv_forward(x, w, b, y, s);
    else
      reference::temporal_conv_forward(x, w, b, y, s);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_TemporalConvBackward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const TemporalConvShape s = conv_shape(c);
  const auto x = random_vector(static_cast<std::size_t>(4) * c * 64 * 8), w = random_vector(static_cast<std::size_t>(c) * c * 5),
             dy = random_vector(x.size());
  std::vector<double> dx(x.size()), dw(w.size()), db(static_cast<std::size_t>(c));
  for (auto _ : state) {
    if constexpr (Parallel)
      temporal_conv_backward(x, w, dy, dx, dw, db, s);
    else
      reference::temporal_conv_backward(x, w, dy, dx, dw, db, s);
    benchmark::DoNotOptimize(dx.data());
  }
}

template <bool Parallel>
void BM_ChannelMixForward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const ChannelMixShape s{4, c, c, 64 * 8};
  const auto x = random_vector(static_cast<std::size_t>(4) * c * 512), w = random_vector(static_cast<std::size_t>(c) * c),
             b = random_vector(static_cast<std::size_t>(c));
  std::vector<double> y(x.size());
  for (auto _ : state) {
    if constexpr (Parallel)
      channel_mix_forward(x, w, b, y, s);
    else
      reference::channel_mix_forward(x, w, b, y, s);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_GraphMixForward(benchmark::State& state) {
  const int planes = static_cast<int>(state.range(0));
  const GraphMixShape s{planes, 25};
  const auto x = random_vector(static_cast<std::size_t>(planes) * 25), a = random_vector(625);
  std::vector<double> y(x.size());
  for (auto _ : state) {
    if constexpr (Parallel)
      graph_mix_forward(x, a, y, s);
    else
      reference::graph_mix_forward(x, a, y, s);
    benchmark::DoNotOptimize(y.data());
  }
}

BENCHMARK(BM_TemporalConvForward<true>)->Name("temporal_conv_forward/parallel")->Arg(16)->Arg(64);
BENCHMARK(BM_TemporalConvForward<false>)->Name("temporal_conv_forward/reference")->Arg(16)->Arg(64);
BENCHMARK(BM_TemporalConvBackward<true>)->Name("temporal_conv_backward/parallel")->Arg(16)->Arg(64);
BENCHMARK(BM_TemporalConvBackward<false>)->Name("temporal_conv_backward/reference")->Arg(16)->Arg(64);
BENCHMARK(BM_ChannelMixForward<true>)->Name("channel_mix_forward/parallel")->Arg(16)->Arg(64);
BENCHMARK(BM_ChannelMixForward<false>)->Name("channel_mix_forward/reference")->Arg(16)->Arg(64);
BENCHMARK(BM_GraphMixForward<true>)->Name("graph_mix_forward/parallel")->Arg(4096)->Arg(65536);
BENCHMARK(BM_GraphMixForward<false>)->Name("graph_mix_forward/reference")->Arg(4096)->Arg(65536);

}  // namespace

BENCHMARK_MAIN();
