#include "owas/decoder.hpp"

#include "owas/errors.hpp"

namespace owas {

const char* to_string(DecoderKind kind) { return kind == DecoderKind::Teu ? "teu" : "tpp"; }

DecoderKind decoder_kind_from_string(const std::string& s) {
  if (s == "teu") return DecoderKind::Teu;
  if (s == "tpp") return DecoderKind::TppOnly;
  throw ArgumentError("unknown decoder '" + s + "' (expected teu or tpp)");
}

void init_decoder_params(Params& params, ParamInit& init, const DecoderChannels& ch, DecoderKind kind) {
  const int h = ch.hidden;
  if (kind == DecoderKind::Teu) {
    init.weight(params, "dec.a.w", {h, ch.pyramid_total}, ch.pyramid_total);
    init.zeros(params, "dec.a.b", {h});
    init.weight(params, "dec.b.w", {h, ch.pyramid_total}, ch.pyramid_total);
    init.zeros(params, "dec.b.b", {h});
    init.weight(params, "dec.refine.w", {h, h}, h);
    init.zeros(params, "dec.refine.b", {h});
  }
  init.weight(params, "dec.d.w", {h, ch.pyramid_total}, ch.pyramid_total);
  init.zeros(params, "dec.d.b", {h});
  const int e_channels = kind == DecoderKind::Teu ? 2 * h : h;
  const int pooled = e_channels * (1 + static_cast<int>(kPyramidLevels.size()));
  init.weight(params, "dec.f.w", {ch.embedding, pooled}, pooled);
  init.zeros(params, "dec.f.b", {ch.embedding});
  init.weight(params, "dec.i.w", {ch.embedding, ch.embedding}, ch.embedding);
  init.zeros(params, "dec.i.b", {ch.embedding});
  init.weight(params, "dec.cls.w", {ch.classes, ch.embedding}, ch.embedding);
  init.zeros(params, "dec.cls.b", {ch.classes});
}

namespace {

void check_pyramid(const ad::Tape& tape, const Pyramid& py) {
  const Tensor& g4 = tape.value(py.g4);
  const Tensor& g7 = tape.value(py.g7);
  const Tensor& g10 = tape.value(py.g10);
  if (g4.rank() != 4 || g7.rank() != 4 || g10.rank() != 4)
    throw ArgumentError("decoder: pyramid maps must be (N, C, T, V)");
  if (g4.dim(3) != g7.dim(3) || g4.dim(3) != g10.dim(3))
    throw ArgumentError("decoder: pyramid joint counts differ");
  if (g4.dim(0) != g7.dim(0) || g4.dim(0) != g10.dim(0))
    throw ArgumentError("decoder: pyramid batch sizes differ");
  const int T = g4.dim(2);
  if (g7.dim(2) * 2 != T || g10.dim(2) * 4 != T)
    throw ArgumentError("decoder: pyramid temporal sizes must be T, T/2, T/4");
}

}  // namespace

DownsamplingResult downsampling_path(Binding& p, const Pyramid& py) {
  ad::Tape& tape = p.tape();
  check_pyramid(tape, py);
  const int quarter = tape.value(py.g10).dim(2);
  const ad::Var g4d = ad::resample_time_nearest(tape, py.g4, quarter);
  const ad::Var g7d = ad::resample_time_nearest(tape, py.g7, quarter);
  const ad::Var id = ad::concat_channels(tape, {g4d, g7d, py.g10});
  DownsamplingResult r;
  r.a_map = ad::channel_mix(tape, id, p("dec.a.w"), p("dec.a.b"));
  r.b_map = ad::channel_mix(tape, id, p("dec.b.w"), p("dec.b.b"));
  r.attention = ad::softmax_time(tape, r.a_map);
  r.c_map = ad::mul(tape, r.attention, r.b_map);
  return r;
}

UpsamplingResult upsampling_path(Binding& p, const Pyramid& py, ad::Var b_map) {
  ad::Tape& tape = p.tape();
  check_pyramid(tape, py);
  const int T = tape.value(py.g4).dim(2);
  const ad::Var g7u = ad::resample_time_nearest(tape, py.g7, T);
  const ad::Var g10u = ad::resample_time_nearest(tape, py.g10, T);
  const ad::Var iu = ad::concat_channels(tape, {py.g4, g7u, g10u});
  UpsamplingResult r;
  r.d_map = ad::channel_mix(tape, iu, p("dec.d.w"), p("dec.d.b"));
  if (b_map.valid()) {
    r.d_tilde = ad::add(tape, r.d_map, ad::temporal_mean_broadcast(tape, b_map, T));
    r.refined = ad::channel_mix(tape, r.d_tilde, p("dec.refine.w"), p("dec.refine.b"));
  }
  return r;
}

ad::Var fuse(ad::Tape& tape, ad::Var c_map, ad::Var d_query, ad::Var d_map) {
  const ad::Var attended = ad::cross_attention(tape, d_query, c_map);
  return ad::concat_channels(tape, {attended, d_map});
}

DecoderOutput tpp_head(Binding& p, ad::Var e) {
  ad::Tape& tape = p.tape();
  const Tensor& ev = tape.value(e);
  expect_rank(ev, 4, "tpp_head input");
  if (ev.dim(2) < 4) throw ArgumentError("tpp_head: need at least 4 frames for the pyramid");
  if (!ev.all_finite()) throw NumericError("tpp_head: non-finite input");
  std::vector<ad::Var> parts{e};
  for (int level : kPyramidLevels) parts.push_back(ad::temporal_bin_mean(tape, e, level));
  const ad::Var pooled = ad::mean_joints(tape, ad::concat_channels(tape, parts));
  DecoderOutput out;
  out.embedding_f = ad::channel_mix(tape, pooled, p("dec.f.w"), p("dec.f.b"));
  out.embedding_i = ad::channel_mix(tape, ad::relu(tape, out.embedding_f), p("dec.i.w"), p("dec.i.b"));
  out.logits = ad::channel_mix(tape, ad::relu(tape, out.embedding_i), p("dec.cls.w"), p("dec.cls.b"));
  return out;
}

DecoderOutput decode(Binding& p, const Pyramid& pyramid, DecoderKind kind) {
  if (kind == DecoderKind::TppOnly) {
    const UpsamplingResult up = upsampling_path(p, pyramid, ad::Var{});
    return tpp_head(p, up.d_map);
  }
  const DownsamplingResult down = downsampling_path(p, pyramid);
  const UpsamplingResult up = upsampling_path(p, pyramid, down.b_map);
  return tpp_head(p, fuse(p.tape(), down.c_map, up.refined, up.d_map));
}

}  // namespace owas
