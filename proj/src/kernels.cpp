#include "owas/kernels.hpp"

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace owas::kernels {

using std::size_t;

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

int temporal_conv_out_frames(int in_frames, int kernel, int stride, int pad) {
  return (in_frames + 2 * pad - kernel) / stride + 1;
}

void channel_mix_forward(std::span<const double> x, std::span<const double> w,
                         std::span<const double> b, std::span<double> y, ChannelMixShape s) {
  const int N = s.batch, Ci = s.in_channels, Co = s.out_channels, S = s.spatial;
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int o = 0; o < Co; ++o) {
      double* yo = y.data() + (static_cast<size_t>(n) * Co + o) * S;
      const double bias = b.empty() ? 0.0 : b[o];
      for (int p = 0; p < S; ++p) yo[p] = bias;
      for (int i = 0; i < Ci; ++i) {
        const double wi = w[static_cast<size_t>(o) * Ci + i];
        const double* xi = x.data() + (static_cast<size_t>(n) * Ci + i) * S;
        for (int p = 0; p < S; ++p) yo[p] += wi * xi[p];
      }
    }
  }
}

void channel_mix_backward(std::span<const double> x, std::span<const double> w,
                          std::span<const double> dy, std::span<double> dx,
                          std::span<double> dw, std::span<double> db, ChannelMixShape s) {
  const int N = s.batch, Ci = s.in_channels, Co = s.out_channels, S = s.spatial;
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int i = 0; i < Ci; ++i) {
      double* dxi = dx.data() + (static_cast<size_t>(n) * Ci + i) * S;
      for (int p = 0; p < S; ++p) dxi[p] = 0.0;
      for (int o = 0; o < Co; ++o) {
        const double wi = w[static_cast<size_t>(o) * Ci + i];
        const double* dyo = dy.data() + (static_cast<size_t>(n) * Co + o) * S;
        for (int p = 0; p < S; ++p) dxi[p] += wi * dyo[p];
      }
    }
  }
#pragma omp parallel for collapse(2) schedule(static)
  for (int o = 0; o < Co; ++o) {
    for (int i = 0; i < Ci; ++i) {
      double acc = 0.0;
      for (int n = 0; n < N; ++n) {
        const double* dyo = dy.data() + (static_cast<size_t>(n) * Co + o) * S;
        const double* xi = x.data() + (static_cast<size_t>(n) * Ci + i) * S;
        for (int p = 0; p < S; ++p) acc += dyo[p] * xi[p];
      }
      dw[static_cast<size_t>(o) * Ci + i] = acc;
    }
  }
  if (db.empty()) return;
#pragma omp parallel for schedule(static)
  for (int o = 0; o < Co; ++o) {
    double acc = 0.0;
    for (int n = 0; n < N; ++n) {
      const double* dyo = dy.data() + (static_cast<size_t>(n) * Co + o) * S;
      for (int p = 0; p < S; ++p) acc += dyo[p];
    }
    db[o] = acc;
  }
}

void temporal_conv_forward(std::span<const double> x, std::span<const double> w,
                           std::span<const double> b, std::span<double> y, TemporalConvShape s) {
  const int N = s.batch, Ci = s.in_channels, Co = s.out_channels;
  const int Ti = s.in_frames, To = s.out_frames, V = s.joints, K = s.kernel;
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int o = 0; o < Co; ++o) {
      double* yo = y.data() + (static_cast<size_t>(n) * Co + o) * To * V;
      const double bias = b.empty() ? 0.0 : b[o];
      for (int p = 0; p < To * V; ++p) yo[p] = bias;
      for (int i = 0; i < Ci; ++i) {
        const double* xi = x.data() + (static_cast<size_t>(n) * Ci + i) * Ti * V;
        const double* wk = w.data() + (static_cast<size_t>(o) * Ci + i) * K;
        for (int k = 0; k < K; ++k) {
          const double wv = wk[k];
          for (int t = 0; t < To; ++t) {
            const int src = t * s.stride + k - s.pad;
            if (src < 0 || src >= Ti) continue;
            const double* xr = xi + static_cast<size_t>(src) * V;
            double* yr = yo + static_cast<size_t>(t) * V;
            for (int v = 0; v < V; ++v) yr[v] += wv * xr[v];
          }
        }
      }
    }
  }
}

void temporal_conv_backward(std::span<const double> x, std::span<const double> w,
                            std::span<const double> dy, std::span<double> dx,
                            std::span<double> dw, std::span<double> db, TemporalConvShape s) {
  const int N = s.batch, Ci = s.in_channels, Co = s.out_channels;
  const int Ti = s.in_frames, To = s.out_frames, V = s.joints, K = s.kernel;
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int i = 0; i < Ci; ++i) {
      double* dxi = dx.data() + (static_cast<size_t>(n) * Ci + i) * Ti * V;
      for (int p = 0; p < Ti * V; ++p) dxi[p] = 0.0;
      for (int o = 0; o < Co; ++o) {
        const double* dyo = dy.data() + (static_cast<size_t>(n) * Co + o) * To * V;
        const double* wk = w.data() + (static_cast<size_t>(o) * Ci + i) * K;
        for (int k = 0; k < K; ++k) {
          const double wv = wk[k];
          for (int t = 0; t < To; ++t) {
            const int dst = t * s.stride + k - s.pad;
            if (dst < 0 || dst >= Ti) continue;
            const double* dyr = dyo + static_cast<size_t>(t) * V;
            double* dxr = dxi + static_cast<size_t>(dst) * V;
            for (int v = 0; v < V; ++v) dxr[v] += wv * dyr[v];
          }
        }
      }
    }
  }
#pragma omp parallel for collapse(2) schedule(static)
  for (int o = 0; o < Co; ++o) {
    for (int i = 0; i < Ci; ++i) {
      for (int k = 0; k < K; ++k) {
        double acc = 0.0;
        for (int n = 0; n < N; ++n) {
          const double* dyo = dy.data() + (static_cast<size_t>(n) * Co + o) * To * V;
          const double* xi = x.data() + (static_cast<size_t>(n) * Ci + i) * Ti * V;
          for (int t = 0; t < To; ++t) {
            const int src = t * s.stride + k - s.pad;
            if (src < 0 || src >= Ti) continue;
            const double* dyr = dyo + static_cast<size_t>(t) * V;
            const double* xr = xi + static_cast<size_t>(src) * V;
            for (int v = 0; v < V; ++v) acc += dyr[v] * xr[v];
          }
        }
        dw[(static_cast<size_t>(o) * Ci + i) * K + k] = acc;
      }
    }
  }
  if (db.empty()) return;
#pragma omp parallel for schedule(static)
  for (int o = 0; o < Co; ++o) {
    double acc = 0.0;
    for (int n = 0; n < N; ++n) {
      const double* dyo = dy.data() + (static_cast<size_t>(n) * Co + o) * To * V;
      for (int p = 0; p < To * V; ++p) acc += dyo[p];
    }
    db[o] = acc;
  }
}

void graph_mix_forward(std::span<const double> x, std::span<const double> adjacency,
                       std::span<double> y, GraphMixShape s) {
  const int P = s.planes, V = s.joints;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < P; ++p) {
    const double* xr = x.data() + static_cast<size_t>(p) * V;
    double* yr = y.data() + static_cast<size_t>(p) * V;
    for (int v = 0; v < V; ++v) {
      const double* arow = adjacency.data() + static_cast<size_t>(v) * V;
      double acc = 0.0;
      for (int u = 0; u < V; ++u) acc += arow[u] * xr[u];
      yr[v] = acc;
    }
  }
}

void graph_mix_backward(std::span<const double> adjacency, std::span<const double> dy,
                        std::span<double> dx, GraphMixShape s) {
  const int P = s.planes, V = s.joints;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < P; ++p) {
    const double* dyr = dy.data() + static_cast<size_t>(p) * V;
    double* dxr = dx.data() + static_cast<size_t>(p) * V;
    for (int u = 0; u < V; ++u) {
      double acc = 0.0;
      for (int v = 0; v < V; ++v) acc += adjacency[static_cast<size_t>(v) * V + u] * dyr[v];
      dxr[u] = acc;
    }
  }
}

}  // namespace owas::kernels
