#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "owas/decoder.hpp"
#include "owas/encoder.hpp"
#include "owas/params.hpp"
#include "owas/skeleton.hpp"

namespace owas {

struct ModelConfig {
  int joints = 8;
  int num_classes = 4;
  std::array<int, 3> channels{16, 32, 32};
  int temporal_kernel = 5;
  int hidden = 32;
  int embedding = 32;
  DecoderKind decoder = DecoderKind::Teu;
  bool batch_norm = true;
  std::uint64_t init_seed = 1;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Encoder + decoder with their parameters.
class Model {
 public:
  Model(ModelConfig config, SkeletonGraph graph);
  Model(ModelConfig config, SkeletonGraph graph, Params params);

  struct Output {
    Pyramid pyramid;
    DecoderOutput decoder;
  };

  Output forward(Binding& binding, ad::Var input) const;

  const ModelConfig& config() const noexcept { return config_; }
  const SkeletonGraph& graph() const noexcept { return graph_; }
  const std::vector<BlockSpec>& plan() const noexcept { return plan_; }
  Params& params() noexcept { return params_; }
  const Params& params() const noexcept { return params_; }

 private:
  ModelConfig config_;
  SkeletonGraph graph_;
  std::vector<BlockSpec> plan_;
  Params params_;
};

/// Smallest multiple of 4 that is >= max(frames, 4).
int padded_length(int frames);

/// Sequences zero-padded symmetrically to a common length divisible by 4.
struct Batch {
  Tensor input;               // (N, 3, T, V)
  Tensor mask;                // (N, T), 1 on real frames
  std::vector<int> offsets;   // first real frame of each sample
  std::vector<int> lengths;   // real frames of each sample
  int frames = 0;
};

Batch make_batch(std::span<const SkeletonSequence* const> sequences);

/// Eval-mode forward of a single sequence, cropped back to its real frames.
struct Inference {
  Tensor logits;       // (K, T)
  Tensor embedding_f;  // (d, T)
  Tensor embedding_i;  // (d, T)
};

Inference infer(Model& model, const SkeletonSequence& sequence);

}  // namespace owas
