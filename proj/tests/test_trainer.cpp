// Optimizer, schedule, checkpoint file and the training loop.

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "owas/errors.hpp"
#include "owas/trainer.hpp"

namespace owas {
namespace {

TEST(Sgd, PlainGradientDescentReduction) {
  TensorMap p{{"w", Tensor({2}, std::vector<double>{1.0, -2.0})}}, v;
  const TensorMap g{{"w", Tensor({2}, std::vector<double>{0.5, 4.0})}};
  sgd_step(p, g, v, 0.1, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(p["w"][0], 1.0 - 0.1 * 0.5);
  EXPECT_DOUBLE_EQ(p["w"][1], -2.0 - 0.1 * 4.0);
}

TEST(Sgd, ZeroGradientLeavesParams) {
  TensorMap p{{"a", Tensor({3}, 1.5)}, {"b", Tensor({1}, -0.25)}}, v;
  const TensorMap before = p;
  sgd_step(p, {{"a", Tensor({3}, 0.0)}}, v, 0.3, 0.9, 0.0);  // b has no gradient
  EXPECT_EQ(p, before);
}

TEST(Sgd, NesterovTwoStepsByHand) {
  // mu = 0.5, lr = 0.1, wd = 0.1, g = 1 each step, theta0 = 1.
  TensorMap p{{"w", Tensor({1}, 1.0)}}, v;
  const TensorMap g{{"w", Tensor({1}, 1.0)}};
  double theta = 1.0, vel = 0.0;
  for (int step = 0; step < 2; ++step) {
    const double d = 1.0 + 0.1 * theta;
    vel = 0.5 * vel - 0.1 * d;
    theta += 0.5 * vel - 0.1 * d;
    sgd_step(p, g, v, 0.1, 0.5, 0.1);
    EXPECT_DOUBLE_EQ(p["w"][0], theta);
    EXPECT_DOUBLE_EQ(v["w"][0], vel);
  }
}

TEST(Sgd, QuadraticBowlConverges) {
  TensorMap p{{"theta", Tensor({1}, 1.0)}}, v;
  int steps = 0;
  while (std::abs(p["theta"][0]) >= 1e-6 && steps < 200) {
    sgd_step(p, {{"theta", Tensor({1}, 2.0 * p["theta"][0])}}, v, 0.1, 0.9, 0.0);
    ++steps;
  }
  EXPECT_LT(std::abs(p["theta"][0]), 1e-6);
  EXPECT_LE(steps, 200);
}

TEST(Sgd, Errors) {
  TensorMap p{{"w", Tensor({2}, 0.0)}}, v;
  EXPECT_THROW(sgd_step(p, {{"w", Tensor({2}, std::nan(""))}}, v, 0.1, 0.9, 0.0), NumericError);
  EXPECT_THROW(sgd_step(p, {{"x", Tensor({2}, 0.0)}}, v, 0.1, 0.9, 0.0), ArgumentError);
  EXPECT_THROW(sgd_step(p, {{"w", Tensor({3}, 0.0)}}, v, 0.1, 0.9, 0.0), ArgumentError);
}

TEST(Schedule, ExponentialPerEpoch) {
  TrainConfig c;
  c.lr0 = 0.1;
  c.lr_decay = 0.95;
  for (int e = 0; e < 60; ++e) EXPECT_EQ(learning_rate(c, e), 0.1 * std::pow(0.95, e));
  c.lr_decay = 1.0;
  EXPECT_EQ(learning_rate(c, 17), 0.1);
}

TEST(TrainConfig, Validation) {
  EXPECT_NO_THROW(TrainConfig{}.validate());
  TrainConfig c;
  c.lr_decay = 0.0;
  EXPECT_THROW(c.validate(), ArgumentError);
  c = TrainConfig{};
  c.momentum = 1.0;
  EXPECT_THROW(c.validate(), ArgumentError);
  c = TrainConfig{};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ArgumentError);
  c = TrainConfig{};
  c.mixup_prob = 1.5;
  EXPECT_THROW(c.validate(), ArgumentError);
}

OpenWorldSplit small_split(int classes, int sequences, std::uint64_t seed = 1) {
  SynthOptions o;
  o.seed = seed;
  o.num_classes = classes;
  o.num_sequences = sequences;
  o.joints = 4;
  o.frames_per_segment = 8;
  o.max_segments = 3;
  return make_split(generate_synthetic(o), {}, 0.6, 0.2);
}

ModelConfig small_model() {
  ModelConfig m;
  m.joints = 4;
  m.channels = {4, 8, 8};
  m.hidden = 8;
  m.embedding = 8;
  return m;
}

TrainConfig short_run(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.lr0 = 0.02;
  return c;
}

TEST(Train, ZeroLearningRateKeepsParams) {
  const OpenWorldSplit split = small_split(3, 20);
  ModelConfig m = small_model();
  m.num_classes = 3;
  const Model initial(m, SkeletonGraph::chain_with_branches(m.joints));
  TrainConfig c = short_run(1);
  c.lr0 = 0.0;
  c.momentum = 0.0;
  c.weight_decay = 0.0;
  const TrainResult r = train(split, m, c);
  EXPECT_EQ(r.last.params.tensors, initial.params().tensors);
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_TRUE(std::isfinite(r.log[0].loss));
}

TEST(Train, DeterministicCheckpoints) {
  const OpenWorldSplit split = small_split(3, 20);
  const TrainConfig c = short_run(2);
  const TrainResult a = train(split, small_model(), c), b = train(split, small_model(), c);
  EXPECT_EQ(serialize_checkpoint(a.best), serialize_checkpoint(b.best));
  EXPECT_EQ(serialize_checkpoint(a.last), serialize_checkpoint(b.last));
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(a.log[i].loss, b.log[i].loss);
}

TEST(Train, LogFollowsScheduleAndSelection) {
  const OpenWorldSplit split = small_split(3, 20);
  TrainConfig c = short_run(4);
  c.mixup_enabled = false;
  c.tc_loss_enabled = false;
  const TrainResult r = train(split, small_model(), c);
  ASSERT_EQ(r.log.size(), 4u);
  const EpochLog* best = &r.log[0];
  for (const EpochLog& row : r.log) {
    EXPECT_EQ(row.lr, c.lr0 * std::pow(c.lr_decay, row.epoch));
    EXPECT_EQ(row.intra, 0.0);
    EXPECT_EQ(row.inter, 0.0);
    if (row.val_acc > best->val_acc || (row.val_acc == best->val_acc && row.val_loss < best->val_loss)) best = &row;
  }
  EXPECT_EQ(r.best.epoch, best->epoch);
  EXPECT_EQ(r.last.epoch, 3);
  EXPECT_EQ(r.best.known_classes, (std::vector<int>{0, 1, 2}));
}

TEST(Train, SeparableClassesReachHighAccuracy) {
  const OpenWorldSplit split = small_split(3, 60, 5);
  TrainConfig c;
  c.epochs = 30;
  const TrainResult r = train(split, small_model(), c);
  EXPECT_GT(r.best.val_acc, 0.9);
}

TEST(Train, DivergenceNamesEpochAndStep) {
  const OpenWorldSplit split = small_split(3, 20);
  TrainConfig c = short_run(3);
  c.lr0 = 1e8;
  try {
    train(split, small_model(), c);
    FAIL() << "training with lr 1e8 did not diverge";
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch"), std::string::npos) << msg;
    EXPECT_NE(msg.find("step"), std::string::npos) << msg;
  }
}

TEST(Train, RejectsUnknownTrainingLabels) {
  OpenWorldSplit split = small_split(3, 20);
  split.known_classes = {0, 1};
  EXPECT_THROW(train(split, small_model(), short_run(1)), ArgumentError);
  OpenWorldSplit empty = small_split(3, 20);
  empty.val.clear();
  EXPECT_THROW(train(empty, small_model(), short_run(1)), ArgumentError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const OpenWorldSplit split = small_split(3, 20);
  const TrainResult r = train(split, small_model(), short_run(2));
  const std::string bytes = serialize_checkpoint(r.best);
  const Checkpoint back = parse_checkpoint(bytes);
  EXPECT_EQ(serialize_checkpoint(back), bytes);
  EXPECT_EQ(back.model, r.best.model);
  EXPECT_EQ(back.params.tensors, r.best.params.tensors);
  EXPECT_EQ(back.val_acc, r.best.val_acc);
  EXPECT_EQ(back.config_hash, r.best.config_hash);

  Model before = checkpoint_model(r.best), after = checkpoint_model(back);
  for (const SkeletonSequence& s : split.val) {
    const Inference a = infer(before, s), b = infer(after, s);
    EXPECT_EQ(a.logits, b.logits);
    EXPECT_EQ(a.embedding_i, b.embedding_i);
  }

  const auto path = std::filesystem::temp_directory_path() / "owas_test_trainer.ckpt";
  save_checkpoint(path, r.best);
  EXPECT_EQ(serialize_checkpoint(load_checkpoint(path)), bytes);
  std::filesystem::remove(path);
}

TEST(Checkpoint, FormatErrors) {
  const OpenWorldSplit split = small_split(3, 20);
  const std::string bytes = serialize_checkpoint(train(split, small_model(), short_run(1)).last);
  EXPECT_THROW(parse_checkpoint("OWAS9" + bytes.substr(5)), FormatError);
  EXPECT_THROW(parse_checkpoint(bytes + "z"), FormatError);
  EXPECT_THROW(parse_checkpoint(bytes.substr(0, bytes.size() - 2)), FormatError);
  std::string wrong_kind = bytes;
  wrong_kind.replace(wrong_kind.find("kind:checkpoint"), 15, "kind:dataset___");
  EXPECT_THROW(parse_checkpoint(wrong_kind), FormatError);
}

TEST(ConfigHash, SensitiveToSettings) {
  const ModelConfig m = small_model();
  TrainConfig a, b;
  b.loss.beta = 0.1;
  EXPECT_EQ(config_hash(m, a), config_hash(m, a));
  EXPECT_NE(config_hash(m, a), config_hash(m, b));
  ModelConfig m2 = m;
  m2.decoder = DecoderKind::TppOnly;
  EXPECT_NE(config_hash(m, a), config_hash(m2, a));
}

}  // namespace
}  // namespace owas
