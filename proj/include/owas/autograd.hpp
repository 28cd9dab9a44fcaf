#pragma once

// Minimal reverse-mode differentiation over Tensor values. A Tape records the
// forward computation as a list of nodes; backward() replays it in reverse,
// accumulating gradients into every node that depends on a parameter.

#include <functional>
#include <vector>

#include "owas/tensor.hpp"

namespace owas::ad {

struct Var {
  int id = -1;
  bool valid() const noexcept { return id >= 0; }
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, Var self, const Tensor& grad_out)>;

  Var constant(Tensor value);
  Var parameter(Tensor value);

  /// Records an op result. `fn` runs only when some parent requires a gradient.
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(Tensor value, const std::vector<Var>& parents, BackwardFn fn);

  const Tensor& value(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).value; }
  bool requires_grad(Var v) const {
    return v.valid() && nodes_.at(static_cast<std::size_t>(v.id)).requires_grad;
  }

  /// Gradient accumulated into `v`; zeros if nothing flowed there.
  Tensor grad(Var v) const;

  /// Accumulation buffer for `v`, or nullptr when `v` does not require a gradient.
  Tensor* grad_sink(Var v);

  /// Seeds d(root)/d(root) = 1 for a one-element root and propagates.
  void backward(Var root);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

/// Running statistics of a batch-normalization layer, updated in training mode.
struct BatchNormStats {
  Tensor mean;
  Tensor var;
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

Var add(Tape& tape, Var a, Var b);
Var mul(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var a, double factor);
Var relu(Tape& tape, Var a);

/// 1x1 convolution on (N, Cin, ...) with weight (Cout, Cin); bias optional.
Var channel_mix(Tape& tape, Var x, Var weight, Var bias);

/// Spatial aggregation over the joint axis of (N, C, T, V) with a fixed (V, V) matrix.
Var graph_mix(Tape& tape, Var x, const Tensor& adjacency);

/// Temporal convolution on (N, Cin, T, V) with weight (Cout, Cin, K).
Var temporal_conv(Tape& tape, Var x, Var weight, Var bias, int stride, int pad);

/// Per-channel normalization over (N, T, V). Training mode uses batch statistics
/// and updates `stats`; evaluation mode normalizes with `stats`.
Var batch_norm(Tape& tape, Var x, Var gamma, Var beta, BatchNormStats& stats, bool training);

Var concat_channels(Tape& tape, const std::vector<Var>& parts);

/// Nearest-neighbour resampling along time: output frame t reads input frame
/// floor(t * Tin / Tout).
Var resample_time_nearest(Tape& tape, Var x, int out_frames);

/// Softmax along the time axis of (N, C, T, V), independently per (n, c, v).
Var softmax_time(Tape& tape, Var x);

/// Temporal mean of (N, C, T, V) replicated over `out_frames` frames.
Var temporal_mean_broadcast(Tape& tape, Var x, int out_frames);

/// Scaled dot-product attention per (sample, joint): queries (N, C, T, V)
/// attend over keys/values (N, C, S, V) along S. Output is (N, C, T, V).
Var cross_attention(Tape& tape, Var queries, Var keys_values);

/// Splits time into `bins` equal segments and replaces each frame by its
/// segment mean. T must be divisible by `bins`.
Var temporal_bin_mean(Tape& tape, Var x, int bins);

/// (N, C, T, V) -> (N, C, T) by averaging joints.
Var mean_joints(Tape& tape, Var x);

/// Mean over unmasked frames of -sum_c target_c log softmax(logits)_c.
/// logits and targets are (N, K, T); mask is (N, T) with 0/1 entries.
Var soft_cross_entropy(Tape& tape, Var logits, const Tensor& targets, const Tensor& mask);

/// Scalar sum_i weights_i * x_i.
Var weighted_sum(Tape& tape, Var x, const Tensor& weights);

}  // namespace owas::ad
