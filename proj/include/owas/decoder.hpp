#pragma once

// Temporal Efficient Upsampling decoder and the temporal-pyramid-pooling head.
//
//   downsampling path:  I_d = [G4 v, G7 v, G10]  -> A, B (1x1)
//                       A~  = softmax over time of A,  C = A~ * B
//   upsampling path:    I_u = [G4, G7 ^, G10 ^]  -> D (1x1)
//                       D~  = D + P(B)   (P: temporal mean, replicated)
//                       D~  -> 1x1 refinement
//   fusion:             E   = [attend(D~ -> C), D]
//   head:               [E, pool_1(E), pool_2(E), pool_4(E)] -> mean over joints
//                       -> F -> I -> logits

#include <array>

#include "owas/autograd.hpp"
#include "owas/encoder.hpp"
#include "owas/params.hpp"

namespace owas {

enum class DecoderKind { Teu, TppOnly };

const char* to_string(DecoderKind kind);
DecoderKind decoder_kind_from_string(const std::string& s);

struct DecoderChannels {
  int pyramid_total;  // C4 + C7 + C10
  int hidden;         // channels of A, B, D and the refinement
  int embedding;      // channels of F and I
  int classes;
};

void init_decoder_params(Params& params, ParamInit& init, const DecoderChannels& channels,
                         DecoderKind kind);

struct DownsamplingResult {
  ad::Var a_map;
  ad::Var attention;  // A~
  ad::Var b_map;
  ad::Var c_map;
};

DownsamplingResult downsampling_path(Binding& p, const Pyramid& pyramid);

struct UpsamplingResult {
  ad::Var d_map;
  ad::Var d_tilde;    // D + P(B)
  ad::Var refined;    // 1x1 refinement of D~
};

UpsamplingResult upsampling_path(Binding& p, const Pyramid& pyramid, ad::Var b_map);

/// Concatenation of the cross-attention output (queries D~, keys/values C) and D.
ad::Var fuse(ad::Tape& tape, ad::Var c_map, ad::Var d_query, ad::Var d_map);

struct DecoderOutput {
  ad::Var logits;       // (N, classes, T)
  ad::Var embedding_f;  // (N, embedding, T)
  ad::Var embedding_i;  // (N, embedding, T)
};

inline constexpr std::array<int, 3> kPyramidLevels{1, 2, 4};

/// Temporal pyramid pooling over the levels {1, 2, 4}, joint averaging and
/// the F / I / classifier projections. Requires T >= 4 and T divisible by 4.
DecoderOutput tpp_head(Binding& p, ad::Var e);

DecoderOutput decode(Binding& p, const Pyramid& pyramid, DecoderKind kind);

}  // namespace owas
