#include "owas/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "owas/errors.hpp"
#include "owas/kernels.hpp"

namespace owas::ad {

using std::size_t;

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, false, {}});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::parameter(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, true, false, {}});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn) {
  return record(std::move(value), std::vector<Var>(parents), std::move(fn));
}

Var Tape::record(Tensor value, const std::vector<Var>& parents, BackwardFn fn) {
  bool needs = false;
  for (Var p : parents) needs = needs || requires_grad(p);
  nodes_.push_back(Node{std::move(value), {}, needs, false, needs ? std::move(fn) : BackwardFn{}});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tensor Tape::grad(Var v) const {
  const Node& node = nodes_.at(static_cast<size_t>(v.id));
  if (node.has_grad) return node.grad;
  return Tensor(node.value.shape(), 0.0);
}

Tensor* Tape::grad_sink(Var v) {
  if (!requires_grad(v)) return nullptr;
  Node& node = nodes_[static_cast<size_t>(v.id)];
  if (!node.has_grad) {
    node.grad = Tensor(node.value.shape(), 0.0);
    node.has_grad = true;
  }
  return &node.grad;
}

void Tape::backward(Var root) {
  Node& r = nodes_.at(static_cast<size_t>(root.id));
  if (r.value.size() != 1) throw ArgumentError("backward: root must hold a single value");
  if (!r.requires_grad) return;
  grad_sink(root)->fill(1.0);
  for (int id = root.id; id >= 0; --id) {
    Node& node = nodes_[static_cast<size_t>(id)];
    if (!node.has_grad || !node.backward) continue;
    node.backward(*this, Var{id}, node.grad);
  }
}

namespace {

void add_into(Tensor& dst, std::span<const double> src) {
  double* d = dst.data();
  for (size_t i = 0; i < src.size(); ++i) d[i] += src[i];
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ArgumentError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) +
                        " vs " + shape_string(b.shape()));
  }
}

size_t trailing_size(const Tensor& t, int from) {
  size_t s = 1;
  for (int i = from; i < t.rank(); ++i) s *= static_cast<size_t>(t.dim(i));
  return s;
}

}  // namespace

Var add(Tape& tape, Var a, Var b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  require_same_shape(av, bv, "add");
  Tensor out = av;
  add_into(out, bv.span());
  return tape.record(std::move(out), {a, b}, [a, b](Tape& tp, Var, const Tensor& g) {
    if (Tensor* da = tp.grad_sink(a)) add_into(*da, g.span());
    if (Tensor* db = tp.grad_sink(b)) add_into(*db, g.span());
  });
}

Var mul(Tape& tape, Var a, Var b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  require_same_shape(av, bv, "mul");
  Tensor out = av;
  for (size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape& tp, Var, const Tensor& g) {
    const Tensor& av = tp.value(a);
    const Tensor& bv = tp.value(b);
    if (Tensor* da = tp.grad_sink(a))
      for (size_t i = 0; i < g.size(); ++i) (*da)[i] += g[i] * bv[i];
    if (Tensor* db = tp.grad_sink(b))
      for (size_t i = 0; i < g.size(); ++i) (*db)[i] += g[i] * av[i];
  });
}

Var scale(Tape& tape, Var a, double factor) {
  Tensor out = tape.value(a);
  for (double& x : out.values()) x *= factor;
  return tape.record(std::move(out), {a}, [a, factor](Tape& tp, Var, const Tensor& g) {
    if (Tensor* da = tp.grad_sink(a))
      for (size_t i = 0; i < g.size(); ++i) (*da)[i] += factor * g[i];
  });
}

Var relu(Tape& tape, Var a) {
  Tensor out = tape.value(a);
  for (double& x : out.values()) x = x > 0.0 ? x : 0.0;
  return tape.record(std::move(out), {a}, [a](Tape& tp, Var, const Tensor& g) {
    const Tensor& av = tp.value(a);
    if (Tensor* da = tp.grad_sink(a))
      for (size_t i = 0; i < g.size(); ++i)
        if (av[i] > 0.0) (*da)[i] += g[i];
  });
}

Var channel_mix(Tape& tape, Var x, Var weight, Var bias) {
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(weight);
  if (xv.rank() < 2 || wv.rank() != 2 || wv.dim(1) != xv.dim(1)) {
    throw ArgumentError("channel_mix: input " + shape_string(xv.shape()) + " vs weight " +
                        shape_string(wv.shape()));
  }
  const kernels::ChannelMixShape s{xv.dim(0), xv.dim(1), wv.dim(0),
                                   static_cast<int>(trailing_size(xv, 2))};
  std::span<const double> bspan;
  if (bias.valid()) {
    const Tensor& bv = tape.value(bias);
    if (static_cast<int>(bv.size()) != s.out_channels) throw ArgumentError("channel_mix: bias size");
    bspan = bv.span();
  }
  std::vector<int> shape = xv.shape();
  shape[1] = s.out_channels;
  Tensor out(shape);
  kernels::channel_mix_forward(xv.span(), wv.span(), bspan, out.span(), s);
  std::vector<Var> parents{x, weight};
  if (bias.valid()) parents.push_back(bias);
  return tape.record(std::move(out), parents, [x, weight, bias, s](Tape& tp, Var, const Tensor& g) {
    const Tensor& xv = tp.value(x);
    const Tensor& wv = tp.value(weight);
    Tensor dx(xv.shape()), dw(wv.shape()), db({s.out_channels});
    kernels::channel_mix_backward(xv.span(), wv.span(), g.span(), dx.span(), dw.span(),
                                  bias.valid() ? db.span() : std::span<double>{}, s);
    if (Tensor* sink = tp.grad_sink(x)) add_into(*sink, dx.span());
    if (Tensor* sink = tp.grad_sink(weight)) add_into(*sink, dw.span());
    if (bias.valid())
      if (Tensor* sink = tp.grad_sink(bias)) add_into(*sink, db.span());
  });
}

Var graph_mix(Tape& tape, Var x, const Tensor& adjacency) {
  const Tensor& xv = tape.value(x);
  expect_rank(xv, 4, "graph_mix");
  const int V = xv.dim(3);
  if (adjacency.rank() != 2 || adjacency.dim(0) != V || adjacency.dim(1) != V) {
    throw ArgumentError("graph_mix: adjacency " + shape_string(adjacency.shape()) +
                        " does not match " + std::to_string(V) + " joints");
  }
  const kernels::GraphMixShape s{static_cast<int>(xv.size() / static_cast<size_t>(V)), V};
  Tensor out(xv.shape());
  kernels::graph_mix_forward(xv.span(), adjacency.span(), out.span(), s);
  return tape.record(std::move(out), {x}, [x, adjacency, s](Tape& tp, Var, const Tensor& g) {
    Tensor dx(g.shape());
    kernels::graph_mix_backward(adjacency.span(), g.span(), dx.span(), s);
    if (Tensor* sink = tp.grad_sink(x)) add_into(*sink, dx.span());
  });
}

Var temporal_conv(Tape& tape, Var x, Var weight, Var bias, int stride, int pad) {
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(weight);
  expect_rank(xv, 4, "temporal_conv input");
  expect_rank(wv, 3, "temporal_conv weight");
  if (wv.dim(1) != xv.dim(1)) throw ArgumentError("temporal_conv: channel mismatch");
  if (stride < 1) throw ArgumentError("temporal_conv: stride must be positive");
  const int out_frames = kernels::temporal_conv_out_frames(xv.dim(2), wv.dim(2), stride, pad);
  if (out_frames < 1) throw ArgumentError("temporal_conv: sequence shorter than kernel");
  const kernels::TemporalConvShape s{xv.dim(0), xv.dim(1), wv.dim(0), xv.dim(2), out_frames,
                                     xv.dim(3), wv.dim(2), stride, pad};
  std::span<const double> bspan;
  if (bias.valid()) bspan = tape.value(bias).span();
  Tensor out({s.batch, s.out_channels, s.out_frames, s.joints});
  kernels::temporal_conv_forward(xv.span(), wv.span(), bspan, out.span(), s);
  std::vector<Var> parents{x, weight};
  if (bias.valid()) parents.push_back(bias);
  return tape.record(std::move(out), parents, [x, weight, bias, s](Tape& tp, Var, const Tensor& g) {
    const Tensor& xv = tp.value(x);
    const Tensor& wv = tp.value(weight);
    Tensor dx(xv.shape()), dw(wv.shape()), db({s.out_channels});
    kernels::temporal_conv_backward(xv.span(), wv.span(), g.span(), dx.span(), dw.span(),
                                    bias.valid() ? db.span() : std::span<double>{}, s);
    if (Tensor* sink = tp.grad_sink(x)) add_into(*sink, dx.span());
    if (Tensor* sink = tp.grad_sink(weight)) add_into(*sink, dw.span());
    if (bias.valid())
      if (Tensor* sink = tp.grad_sink(bias)) add_into(*sink, db.span());
  });
}

Var batch_norm(Tape& tape, Var x, Var gamma, Var beta, BatchNormStats& stats, bool training) {
  const Tensor& xv = tape.value(x);
  const int N = xv.dim(0), C = xv.dim(1);
  const size_t S = trailing_size(xv, 2);
  const double M = static_cast<double>(N) * static_cast<double>(S);
  const Tensor& gv = tape.value(gamma);
  const Tensor& bv = tape.value(beta);
  if (static_cast<int>(gv.size()) != C || static_cast<int>(bv.size()) != C)
    throw ArgumentError("batch_norm: affine parameter size");
  if (stats.mean.size() != static_cast<size_t>(C)) {
    stats.mean = Tensor({C}, 0.0);
    stats.var = Tensor({C}, 1.0);
  }

  std::vector<double> mean(static_cast<size_t>(C)), inv_std(static_cast<size_t>(C));
  for (int c = 0; c < C; ++c) {
    if (training) {
      double sum = 0.0;
      for (int n = 0; n < N; ++n) {
        const double* p = xv.data() + (static_cast<size_t>(n) * C + c) * S;
        for (size_t i = 0; i < S; ++i) sum += p[i];
      }
      const double mu = sum / M;
      double sq = 0.0;
      for (int n = 0; n < N; ++n) {
        const double* p = xv.data() + (static_cast<size_t>(n) * C + c) * S;
        for (size_t i = 0; i < S; ++i) sq += (p[i] - mu) * (p[i] - mu);
      }
      const double var = sq / M;
      mean[c] = mu;
      inv_std[c] = 1.0 / std::sqrt(var + kBatchNormEps);
      const double unbiased = M > 1.0 ? sq / (M - 1.0) : var;
      stats.mean[c] = (1.0 - kBatchNormMomentum) * stats.mean[c] + kBatchNormMomentum * mu;
      stats.var[c] = (1.0 - kBatchNormMomentum) * stats.var[c] + kBatchNormMomentum * unbiased;
    } else {
      mean[c] = stats.mean[c];
      inv_std[c] = 1.0 / std::sqrt(stats.var[c] + kBatchNormEps);
    }
  }

  Tensor out(xv.shape());
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const size_t off = (static_cast<size_t>(n) * C + c) * S;
      for (size_t i = 0; i < S; ++i)
        out[off + i] = gv[c] * (xv[off + i] - mean[c]) * inv_std[c] + bv[c];
    }

  return tape.record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, mean, inv_std, training, N, C, S, M](Tape& tp, Var, const Tensor& g) {
        const Tensor& xv = tp.value(x);
        const Tensor& gv = tp.value(gamma);
        Tensor* dx = tp.grad_sink(x);
        Tensor* dgamma = tp.grad_sink(gamma);
        Tensor* dbeta = tp.grad_sink(beta);
        for (int c = 0; c < C; ++c) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (int n = 0; n < N; ++n) {
            const size_t off = (static_cast<size_t>(n) * C + c) * S;
            for (size_t i = 0; i < S; ++i) {
              const double xhat = (xv[off + i] - mean[c]) * inv_std[c];
              sum_g += g[off + i];
              sum_gx += g[off + i] * xhat;
            }
          }
          if (dgamma) (*dgamma)[c] += sum_gx;
          if (dbeta) (*dbeta)[c] += sum_g;
          if (!dx) continue;
          const double gc = gv[c];
          for (int n = 0; n < N; ++n) {
            const size_t off = (static_cast<size_t>(n) * C + c) * S;
            for (size_t i = 0; i < S; ++i) {
              if (training) {
                const double xhat = (xv[off + i] - mean[c]) * inv_std[c];
                (*dx)[off + i] +=
                    gc * inv_std[c] / M * (M * g[off + i] - sum_g - xhat * sum_gx);
              } else {
                (*dx)[off + i] += gc * inv_std[c] * g[off + i];
              }
            }
          }
        }
      });
}

Var concat_channels(Tape& tape, const std::vector<Var>& parts) {
  if (parts.empty()) throw ArgumentError("concat_channels: no inputs");
  const Tensor& first = tape.value(parts.front());
  std::vector<int> shape = first.shape();
  int total = 0;
  std::vector<int> channels;
  for (Var p : parts) {
    const Tensor& v = tape.value(p);
    std::vector<int> a = v.shape(), b = first.shape();
    if (a.size() != b.size() || a.size() < 2) throw ArgumentError("concat_channels: rank mismatch");
    a[1] = b[1] = 0;
    if (a != b) throw ArgumentError("concat_channels: non-channel dimensions differ");
    channels.push_back(v.dim(1));
    total += v.dim(1);
  }
  shape[1] = total;
  const int N = first.dim(0);
  const size_t S = trailing_size(first, 2);
  Tensor out(shape);
  int offset = 0;
  for (size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = tape.value(parts[k]);
    for (int n = 0; n < N; ++n)
      std::copy_n(v.data() + static_cast<size_t>(n) * channels[k] * S,
                  static_cast<size_t>(channels[k]) * S,
                  out.data() + (static_cast<size_t>(n) * total + offset) * S);
    offset += channels[k];
  }
  return tape.record(std::move(out), parts, [parts, channels, total, N, S](Tape& tp, Var, const Tensor& g) {
    int offset = 0;
    for (size_t k = 0; k < parts.size(); ++k) {
      if (Tensor* sink = tp.grad_sink(parts[k])) {
        for (int n = 0; n < N; ++n) {
          const double* src = g.data() + (static_cast<size_t>(n) * total + offset) * S;
          double* dst = sink->data() + static_cast<size_t>(n) * channels[k] * S;
          for (size_t i = 0; i < static_cast<size_t>(channels[k]) * S; ++i) dst[i] += src[i];
        }
      }
      offset += channels[k];
    }
  });
}

Var resample_time_nearest(Tape& tape, Var x, int out_frames) {
  const Tensor& xv = tape.value(x);
  expect_rank(xv, 4, "resample_time_nearest");
  if (out_frames < 1) throw ArgumentError("resample_time_nearest: out_frames must be positive");
  const int N = xv.dim(0), C = xv.dim(1), Ti = xv.dim(2), V = xv.dim(3);
  std::vector<int> src(static_cast<size_t>(out_frames));
  for (int t = 0; t < out_frames; ++t)
    src[t] = static_cast<int>(static_cast<long long>(t) * Ti / out_frames);
  Tensor out({N, C, out_frames, V});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int t = 0; t < out_frames; ++t)
        for (int v = 0; v < V; ++v) out.at(n, c, t, v) = xv.at(n, c, src[t], v);
  return tape.record(std::move(out), {x}, [x, src, N, C, V](Tape& tp, Var, const Tensor& g) {
    Tensor* dx = tp.grad_sink(x);
    const int To = static_cast<int>(src.size());
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c)
        for (int t = 0; t < To; ++t)
          for (int v = 0; v < V; ++v) dx->at(n, c, src[t], v) += g.at(n, c, t, v);
  });
}

Var softmax_time(Tape& tape, Var x) {
  const Tensor& xv = tape.value(x);
  expect_rank(xv, 4, "softmax_time");
  const int N = xv.dim(0), C = xv.dim(1), T = xv.dim(2), V = xv.dim(3);
  Tensor out(xv.shape());
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int v = 0; v < V; ++v) {
        double mx = xv.at(n, c, 0, v);
        for (int t = 1; t < T; ++t) mx = std::max(mx, xv.at(n, c, t, v));
        double z = 0.0;
        for (int t = 0; t < T; ++t) z += std::exp(xv.at(n, c, t, v) - mx);
        for (int t = 0; t < T; ++t) out.at(n, c, t, v) = std::exp(xv.at(n, c, t, v) - mx) / z;
      }
  return tape.record(std::move(out), {x}, [x, N, C, T, V](Tape& tp, Var self, const Tensor& g) {
    const Tensor& y = tp.value(self);
    Tensor* dx = tp.grad_sink(x);
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c)
        for (int v = 0; v < V; ++v) {
          double dot = 0.0;
          for (int t = 0; t < T; ++t) dot += y.at(n, c, t, v) * g.at(n, c, t, v);
          for (int t = 0; t < T; ++t) dx->at(n, c, t, v) += y.at(n, c, t, v) * (g.at(n, c, t, v) - dot);
        }
  });
}

Var temporal_mean_broadcast(Tape& tape, Var x, int out_frames) {
  const Tensor& xv = tape.value(x);
  expect_rank(xv, 4, "temporal_mean_broadcast");
  const int N = xv.dim(0), C = xv.dim(1), T = xv.dim(2), V = xv.dim(3);
  Tensor out({N, C, out_frames, V});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int v = 0; v < V; ++v) {
        double sum = 0.0;
        for (int t = 0; t < T; ++t) sum += xv.at(n, c, t, v);
        const double mean = sum / T;
        for (int t = 0; t < out_frames; ++t) out.at(n, c, t, v) = mean;
      }
  return tape.record(std::move(out), {x}, [x, N, C, T, V, out_frames](Tape& tp, Var, const Tensor& g) {
    Tensor* dx = tp.grad_sink(x);
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c)
        for (int v = 0; v < V; ++v) {
          double sum = 0.0;
          for (int t = 0; t < out_frames; ++t) sum += g.at(n, c, t, v);
          for (int t = 0; t < T; ++t) dx->at(n, c, t, v) += sum / T;
        }
  });
}

Var cross_attention(Tape& tape, Var queries, Var keys_values) {
  const Tensor& q = tape.value(queries);
  const Tensor& kv = tape.value(keys_values);
  expect_rank(q, 4, "cross_attention queries");
  expect_rank(kv, 4, "cross_attention keys");
  const int N = q.dim(0), C = q.dim(1), T = q.dim(2), V = q.dim(3), S = kv.dim(2);
  if (kv.dim(0) != N || kv.dim(1) != C || kv.dim(3) != V)
    throw ArgumentError("cross_attention: " + shape_string(q.shape()) + " vs " + shape_string(kv.shape()));
  if (!q.all_finite() || !kv.all_finite()) throw NumericError("cross_attention: non-finite input");
  const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(C));
  // weights laid out (N, V, T, S)
  auto weights = std::make_shared<std::vector<double>>(static_cast<size_t>(N) * V * T * S);
  Tensor out(q.shape());
  std::vector<double> scores(static_cast<size_t>(S));
  for (int n = 0; n < N; ++n)
    for (int v = 0; v < V; ++v)
      for (int t = 0; t < T; ++t) {
        double mx = -INFINITY;
        for (int s = 0; s < S; ++s) {
          double dot = 0.0;
          for (int c = 0; c < C; ++c) dot += q.at(n, c, t, v) * kv.at(n, c, s, v);
          scores[s] = dot * inv_sqrt_c;
          mx = std::max(mx, scores[s]);
        }
        if (!std::isfinite(mx)) throw NumericError("cross_attention: non-finite attention score");
        double z = 0.0;
        for (int s = 0; s < S; ++s) z += std::exp(scores[s] - mx);
        double* w = weights->data() + ((static_cast<size_t>(n) * V + v) * T + t) * S;
        for (int s = 0; s < S; ++s) w[s] = std::exp(scores[s] - mx) / z;
        for (int c = 0; c < C; ++c) {
          double acc = 0.0;
          for (int s = 0; s < S; ++s) acc += w[s] * kv.at(n, c, s, v);
          out.at(n, c, t, v) = acc;
        }
      }
  return tape.record(
      std::move(out), {queries, keys_values},
      [queries, keys_values, weights, N, C, T, V, S, inv_sqrt_c](Tape& tp, Var, const Tensor& g) {
        const Tensor& q = tp.value(queries);
        const Tensor& kv = tp.value(keys_values);
        Tensor* dq = tp.grad_sink(queries);
        Tensor* dkv = tp.grad_sink(keys_values);
        std::vector<double> da(static_cast<size_t>(S)), ds(static_cast<size_t>(S));
        for (int n = 0; n < N; ++n)
          for (int v = 0; v < V; ++v)
            for (int t = 0; t < T; ++t) {
              const double* w = weights->data() + ((static_cast<size_t>(n) * V + v) * T + t) * S;
              double dot = 0.0;
              for (int s = 0; s < S; ++s) {
                double acc = 0.0;
                for (int c = 0; c < C; ++c) acc += g.at(n, c, t, v) * kv.at(n, c, s, v);
                da[s] = acc;
                dot += w[s] * acc;
              }
              for (int s = 0; s < S; ++s) ds[s] = w[s] * (da[s] - dot) * inv_sqrt_c;
              if (dkv) {
                for (int s = 0; s < S; ++s)
                  for (int c = 0; c < C; ++c)
                    dkv->at(n, c, s, v) += w[s] * g.at(n, c, t, v) + ds[s] * q.at(n, c, t, v);
              }
              if (dq) {
                for (int c = 0; c < C; ++c) {
                  double acc = 0.0;
                  for (int s = 0; s < S; ++s) acc += ds[s] * kv.at(n, c, s, v);
                  dq->at(n, c, t, v) += acc;
                }
              }
            }
      });
}

Var temporal_bin_mean(Tape& tape, Var x, int bins) {
  const Tensor& xv = tape.value(x);
  expect_rank(xv, 4, "temporal_bin_mean");
  const int N = xv.dim(0), C = xv.dim(1), T = xv.dim(2), V = xv.dim(3);
  if (bins < 1 || T % bins != 0)
    throw ArgumentError("temporal_bin_mean: " + std::to_string(T) + " frames not divisible into " +
                        std::to_string(bins) + " bins");
  const int width = T / bins;
  Tensor out(xv.shape());
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int b = 0; b < bins; ++b)
        for (int v = 0; v < V; ++v) {
          double sum = 0.0;
          for (int t = b * width; t < (b + 1) * width; ++t) sum += xv.at(n, c, t, v);
          for (int t = b * width; t < (b + 1) * width; ++t) out.at(n, c, t, v) = sum / width;
        }
  return tape.record(std::move(out), {x}, [x, N, C, V, bins, width](Tape& tp, Var, const Tensor& g) {
    Tensor* dx = tp.grad_sink(x);
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c)
        for (int b = 0; b < bins; ++b)
          for (int v = 0; v < V; ++v) {
            double sum = 0.0;
            for (int t = b * width; t < (b + 1) * width; ++t) sum += g.at(n, c, t, v);
            for (int t = b * width; t < (b + 1) * width; ++t) dx->at(n, c, t, v) += sum / width;
          }
  });
}

Var mean_joints(Tape& tape, Var x) {
  const Tensor& xv = tape.value(x);
  expect_rank(xv, 4, "mean_joints");
  const int N = xv.dim(0), C = xv.dim(1), T = xv.dim(2), V = xv.dim(3);
  Tensor out({N, C, T});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int t = 0; t < T; ++t) {
        double sum = 0.0;
        for (int v = 0; v < V; ++v) sum += xv.at(n, c, t, v);
        out.at(n, c, t) = sum / V;
      }
  return tape.record(std::move(out), {x}, [x, N, C, T, V](Tape& tp, Var, const Tensor& g) {
    Tensor* dx = tp.grad_sink(x);
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c)
        for (int t = 0; t < T; ++t)
          for (int v = 0; v < V; ++v) dx->at(n, c, t, v) += g.at(n, c, t) / V;
  });
}

Var soft_cross_entropy(Tape& tape, Var logits, const Tensor& targets, const Tensor& mask) {
  const Tensor& lv = tape.value(logits);
  expect_rank(lv, 3, "soft_cross_entropy logits");
  if (!lv.same_shape(targets)) throw ArgumentError("soft_cross_entropy: target shape mismatch");
  const int N = lv.dim(0), K = lv.dim(1), T = lv.dim(2);
  if (mask.rank() != 2 || mask.dim(0) != N || mask.dim(1) != T)
    throw ArgumentError("soft_cross_entropy: mask shape mismatch");
  double count = 0.0;
  for (double m : mask.values()) count += m;
  if (count <= 0.0) throw ArgumentError("soft_cross_entropy: all frames are masked");

  auto probs = std::make_shared<Tensor>(lv.shape());
  double loss = 0.0;
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < T; ++t) {
      double mx = lv.at(n, 0, t);
      for (int k = 1; k < K; ++k) mx = std::max(mx, lv.at(n, k, t));
      double z = 0.0;
      for (int k = 0; k < K; ++k) z += std::exp(lv.at(n, k, t) - mx);
      const double log_z = std::log(z) + mx;
      for (int k = 0; k < K; ++k) probs->at(n, k, t) = std::exp(lv.at(n, k, t) - log_z);
      const double m = mask[static_cast<size_t>(n) * T + t];
      if (m == 0.0) continue;
      for (int k = 0; k < K; ++k) loss -= m * targets.at(n, k, t) * (lv.at(n, k, t) - log_z);
    }
  loss /= count;
  return tape.record(Tensor({1}, loss), {logits},
                     [logits, probs, targets, mask, count, N, K, T](Tape& tp, Var, const Tensor& g) {
                       Tensor* dl = tp.grad_sink(logits);
                       const double scale = g[0] / count;
                       for (int n = 0; n < N; ++n)
                         for (int t = 0; t < T; ++t) {
                           const double m = mask[static_cast<size_t>(n) * T + t];
                           if (m == 0.0) continue;
                           double mass = 0.0;
                           for (int k = 0; k < K; ++k) mass += targets.at(n, k, t);
                           for (int k = 0; k < K; ++k)
                             dl->at(n, k, t) +=
                                 scale * m * (probs->at(n, k, t) * mass - targets.at(n, k, t));
                         }
                     });
}

Var weighted_sum(Tape& tape, Var x, const Tensor& weights) {
  const Tensor& xv = tape.value(x);
  if (xv.size() != weights.size()) throw ArgumentError("weighted_sum: size mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < xv.size(); ++i) acc += weights[i] * xv[i];
  return tape.record(Tensor({1}, acc), {x}, [x, weights](Tape& tp, Var, const Tensor& g) {
    Tensor* dx = tp.grad_sink(x);
    for (size_t i = 0; i < weights.size(); ++i) (*dx)[i] += g[0] * weights[i];
  });
}

}  // namespace owas::ad
