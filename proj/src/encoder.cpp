#include "owas/encoder.hpp"

#include <cstdio>

#include "owas/errors.hpp"

namespace owas {

std::string block_prefix(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "enc.b%02d", index);
  return buf;
}

std::vector<BlockSpec> encoder_plan(int in_channels, const std::array<int, 3>& ch) {
  for (int c : ch)
    if (c < 1) throw ArgumentError("encoder channel plan must be positive");
  return {
      {in_channels, ch[0], 1, false},  //
      {ch[0], ch[0], 1, true},          //
      {ch[0], ch[0], 1, true},          //
      {ch[0], ch[0], 1, true},          // G4
      {ch[0], ch[1], 2, true},          //
      {ch[1], ch[1], 1, true},          //
      {ch[1], ch[1], 1, true},          // G7
      {ch[1], ch[2], 2, true},          //
      {ch[2], ch[2], 1, true},          //
      {ch[2], ch[2], 1, true},          // G10
  };
}

void init_block_params(Params& params, ParamInit& init, const std::string& prefix,
                       const BlockSpec& spec, int temporal_kernel, bool batch_norm) {
  const int ci = spec.in_channels, co = spec.out_channels;
  init.weight(params, prefix + ".gcn.w", {co, ci}, ci);
  init.zeros(params, prefix + ".gcn.b", {co});
  init.weight(params, prefix + ".tcn.w", {co, co, temporal_kernel}, co * temporal_kernel);
  init.zeros(params, prefix + ".tcn.b", {co});
  if (batch_norm) {
    init.norm(params, prefix + ".bn1", co);
    init.norm(params, prefix + ".bn2", co);
  }
  if (spec.residual && (ci != co || spec.stride != 1)) {
    init.weight(params, prefix + ".res.w", {co, ci, 1}, ci);
    init.zeros(params, prefix + ".res.b", {co});
    if (batch_norm) init.norm(params, prefix + ".res_bn", co);
  }
}

namespace {

ad::Var maybe_norm(Binding& p, const std::string& name, ad::Var x, bool enabled) {
  if (!enabled) return x;
  return ad::batch_norm(p.tape(), x, p(name + ".g"), p(name + ".b"), p.norm(name), p.training());
}

}  // namespace

ad::Var stgcn_block(Binding& p, const std::string& prefix, ad::Var x, const SkeletonGraph& graph,
                    int temporal_stride, const BlockOptions& options) {
  ad::Tape& tape = p.tape();
  const Tensor& xv = tape.value(x);
  expect_rank(xv, 4, "stgcn_block input");
  if (!xv.all_finite()) throw NumericError(prefix + ": non-finite input");
  if (temporal_stride != 1 && temporal_stride != 2)
    throw ArgumentError(prefix + ": temporal stride must be 1 or 2");
  if (xv.dim(3) != graph.num_joints)
    throw ArgumentError(prefix + ": input has " + std::to_string(xv.dim(3)) + " joints, graph has " +
                        std::to_string(graph.num_joints));
  const int in_channels = xv.dim(1);

  ad::Var h = ad::graph_mix(tape, x, graph.adjacency);
  h = ad::channel_mix(tape, h, p(prefix + ".gcn.w"), p(prefix + ".gcn.b"));
  h = maybe_norm(p, prefix + ".bn1", h, options.batch_norm);
  h = ad::relu(tape, h);
  const ad::Var tw = p(prefix + ".tcn.w");
  const int kernel = tape.value(tw).dim(2);
  h = ad::temporal_conv(tape, h, tw, p(prefix + ".tcn.b"), temporal_stride, kernel / 2);
  h = maybe_norm(p, prefix + ".bn2", h, options.batch_norm);

  if (options.residual) {
    ad::Var r = x;
    const int out_channels = tape.value(h).dim(1);
    if (in_channels != out_channels || temporal_stride != 1) {
      r = ad::temporal_conv(tape, x, p(prefix + ".res.w"), p(prefix + ".res.b"), temporal_stride, 0);
      r = maybe_norm(p, prefix + ".res_bn", r, options.batch_norm);
    }
    h = ad::add(tape, h, r);
  }
  return ad::relu(tape, h);
}

void init_encoder_params(Params& params, ParamInit& init, const std::vector<BlockSpec>& plan,
                         int temporal_kernel, bool batch_norm) {
  if (batch_norm) init.norm(params, "enc.data_bn", plan.front().in_channels);
  for (std::size_t i = 0; i < plan.size(); ++i)
    init_block_params(params, init, block_prefix(static_cast<int>(i) + 1), plan[i], temporal_kernel,
                      batch_norm);
}

Pyramid encode(Binding& p, ad::Var x, const SkeletonGraph& graph, const std::vector<BlockSpec>& plan,
               bool batch_norm) {
  const Tensor& xv = p.tape().value(x);
  expect_rank(xv, 4, "encode input");
  if (xv.dim(2) % 4 != 0)
    throw StateError("encode: temporal length " + std::to_string(xv.dim(2)) +
                     " is not a multiple of 4; inputs must be padded");
  ad::Var h = maybe_norm(p, "enc.data_bn", x, batch_norm);
  Pyramid out;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const BlockOptions options{batch_norm, plan[i].residual};
    h = stgcn_block(p, block_prefix(static_cast<int>(i) + 1), h, graph, plan[i].stride, options);
    if (i == 3) out.g4 = h;
    if (i == 6) out.g7 = h;
    if (i == 9) out.g10 = h;
  }
  return out;
}

}  // namespace owas
