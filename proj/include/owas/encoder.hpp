#pragma once

#include <array>
#include <string>
#include <vector>

#include "owas/autograd.hpp"
#include "owas/params.hpp"
#include "owas/skeleton.hpp"

namespace owas {

struct BlockSpec {
  int in_channels;
  int out_channels;
  int stride;
  bool residual;
};

/// Ten blocks; blocks 4, 7 and 10 are tapped as G4 (stride 1), G7 (stride 2)
/// and G10 (stride 4). Blocks 5 and 8 downsample time by 2.
std::vector<BlockSpec> encoder_plan(int in_channels, const std::array<int, 3>& channels);

struct BlockOptions {
  bool batch_norm = true;
  bool residual = true;
};

/// Creates the parameters of one block under `prefix` (e.g. "enc.b01").
void init_block_params(Params& params, ParamInit& init, const std::string& prefix,
                       const BlockSpec& spec, int temporal_kernel, bool batch_norm);

/// Spatial graph convolution (joint aggregation then channel projection),
/// rectifier, temporal convolution with the given stride, residual and a final
/// rectifier. The temporal kernel size is read from "<prefix>.tcn.w".
ad::Var stgcn_block(Binding& p, const std::string& prefix, ad::Var x, const SkeletonGraph& graph,
                    int temporal_stride, const BlockOptions& options);

struct Pyramid {
  ad::Var g4;
  ad::Var g7;
  ad::Var g10;
};

void init_encoder_params(Params& params, ParamInit& init, const std::vector<BlockSpec>& plan,
                         int temporal_kernel, bool batch_norm);

/// Runs the ten-block encoder on (N, 3, T, V); T must be divisible by 4.
Pyramid encode(Binding& p, ad::Var x, const SkeletonGraph& graph, const std::vector<BlockSpec>& plan,
               bool batch_norm);

std::string block_prefix(int index);

}  // namespace owas
