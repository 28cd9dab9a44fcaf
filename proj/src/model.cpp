#include "owas/model.hpp"

#include <algorithm>

#include "owas/errors.hpp"

namespace owas {

namespace {

DecoderChannels decoder_channels(const ModelConfig& c) {
  return {c.channels[0] + c.channels[1] + c.channels[2], c.hidden, c.embedding, c.num_classes};
}

void check_config(const ModelConfig& c, const SkeletonGraph& g) {
  if (c.joints != g.num_joints) throw ArgumentError("model joints do not match the graph");
  if (c.num_classes < 1) throw ArgumentError("model needs at least one class");
  if (c.temporal_kernel < 1 || c.temporal_kernel % 2 == 0)
    throw ArgumentError("temporal kernel must be odd and positive");
  if (c.hidden < 1 || c.embedding < 1) throw ArgumentError("decoder widths must be positive");
}

}  // namespace

Model::Model(ModelConfig config, SkeletonGraph graph)
    : config_(config), graph_(std::move(graph)), plan_(encoder_plan(3, config.channels)) {
  check_config(config_, graph_);
  ParamInit init(config_.init_seed);
  init_encoder_params(params_, init, plan_, config_.temporal_kernel, config_.batch_norm);
  init_decoder_params(params_, init, decoder_channels(config_), config_.decoder);
}

Model::Model(ModelConfig config, SkeletonGraph graph, Params params)
    : config_(config), graph_(std::move(graph)), plan_(encoder_plan(3, config.channels)),
      params_(std::move(params)) {
  check_config(config_, graph_);
  Params expected;
  ParamInit init(0);
  init_encoder_params(expected, init, plan_, config_.temporal_kernel, config_.batch_norm);
  init_decoder_params(expected, init, decoder_channels(config_), config_.decoder);
  for (const auto& [name, t] : expected.tensors) {
    auto it = params_.tensors.find(name);
    if (it == params_.tensors.end()) throw ArgumentError("missing parameter " + name);
    if (it->second.shape() != t.shape())
      throw ArgumentError("parameter " + name + " has shape " + shape_string(it->second.shape()) +
                          ", expected " + shape_string(t.shape()));
  }
  for (const auto& [name, stats] : expected.norms)
    if (!params_.norms.contains(name)) throw ArgumentError("missing normalization stats " + name);
}

Model::Output Model::forward(Binding& binding, ad::Var input) const {
  const Tensor& x = binding.tape().value(input);
  expect_rank(x, 4, "model input");
  if (x.dim(1) != 3 || x.dim(3) != config_.joints)
    throw ArgumentError("model input must be (N, 3, T, " + std::to_string(config_.joints) + "), got " +
                        shape_string(x.shape()));
  Output out;
  out.pyramid = encode(binding, input, graph_, plan_, config_.batch_norm);
  out.decoder = decode(binding, out.pyramid, config_.decoder);
  return out;
}

int padded_length(int frames) { return std::max(4, (frames + 3) / 4 * 4); }

Batch make_batch(std::span<const SkeletonSequence* const> sequences) {
  if (sequences.empty()) throw ArgumentError("make_batch: empty batch");
  const int V = sequences.front()->joints;
  int longest = 0;
  for (const SkeletonSequence* s : sequences) {
    if (s->joints != V) throw ArgumentError("make_batch: joint counts differ");
    longest = std::max(longest, s->frames);
  }
  const int T = padded_length(longest);
  const int N = static_cast<int>(sequences.size());
  Batch b;
  b.frames = T;
  b.input = Tensor({N, 3, T, V}, 0.0);
  b.mask = Tensor({N, T}, 0.0);
  for (int n = 0; n < N; ++n) {
    const SkeletonSequence& s = *sequences[n];
    const int offset = (T - s.frames) / 2;
    b.offsets.push_back(offset);
    b.lengths.push_back(s.frames);
    for (int t = 0; t < s.frames; ++t) {
      b.mask[static_cast<std::size_t>(n) * T + offset + t] = 1.0;
      for (int a = 0; a < 3; ++a)
        for (int v = 0; v < V; ++v) b.input.at(n, a, offset + t, v) = s.coord(a, t, v);
    }
  }
  return b;
}

Inference infer(Model& model, const SkeletonSequence& sequence) {
  const SkeletonSequence* one[] = {&sequence};
  const Batch batch = make_batch(one);
  ad::Tape tape;
  Binding binding(tape, model.params(), /*trainable=*/false, /*training=*/false);
  const Model::Output out = model.forward(binding, tape.constant(batch.input));
  auto crop = [&](ad::Var v) {
    const Tensor& full = tape.value(v);
    const int C = full.dim(1);
    Tensor t({C, sequence.frames});
    for (int c = 0; c < C; ++c)
      for (int f = 0; f < sequence.frames; ++f) t[static_cast<std::size_t>(c) * sequence.frames + f] =
          full.at(0, c, batch.offsets[0] + f);
    return t;
  };
  return {crop(out.decoder.logits), crop(out.decoder.embedding_f), crop(out.decoder.embedding_i)};
}

}  // namespace owas
