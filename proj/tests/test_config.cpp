// Run configuration file.

#include <gtest/gtest.h>

#include "owas/config.hpp"
#include "owas/errors.hpp"

namespace owas {
namespace {

TEST(Config, ParsesEveryKind) {
  const RunConfig c = parse_config(
      "# desk run\n"
      "batch_size = 16\n"
      "epochs=60\n"
      "lr0 = 0.1\n"
      "mixup_enabled = false\n"
      "tc_loss_enabled = 1\n"
      "beta = 0.2\n"
      "channels = 4,8,12\n"
      "decoder = tpp\n"
      "score = logit\n"
      "\n"
      "clusters = 3\n");
  EXPECT_EQ(c.train.batch_size, 16);
  EXPECT_EQ(c.train.epochs, 60);
  EXPECT_EQ(c.train.lr0, 0.1);
  EXPECT_FALSE(c.train.mixup_enabled);
  EXPECT_TRUE(c.train.tc_loss_enabled);
  EXPECT_EQ(c.train.loss.beta, 0.2);
  EXPECT_EQ(c.model.channels, (std::array<int, 3>{4, 8, 12}));
  EXPECT_EQ(c.model.decoder, DecoderKind::TppOnly);
  EXPECT_EQ(c.score, ConfidenceScore::MaxLogit);
  EXPECT_EQ(c.clusters, 3);
}

TEST(Config, FormatRoundTrips) {
  RunConfig c;
  c.train.lr0 = 0.0123;
  c.train.grad_clip = 2.5;
  c.model.hidden = 24;
  c.percentile = 7.5;
  const std::string text = format_config(c);
  const RunConfig back = parse_config(text);
  EXPECT_EQ(format_config(back), text);
  EXPECT_EQ(back.train.lr0, 0.0123);
  EXPECT_EQ(back.model, c.model);
}

TEST(Config, BaseValuesSurvive) {
  RunConfig base;
  base.train.epochs = 7;
  EXPECT_EQ(parse_config("seed = 3\n", base).train.epochs, 7);
}

TEST(Config, ErrorsNameKeyAndLine) {
  try {
    parse_config("epochs = 3\nwarp = 9\n");
    FAIL();
  } catch (const ArgumentError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("warp"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
  }
  RunConfig c;
  EXPECT_THROW(apply_setting(c, "epochs", "many"), ArgumentError);
  EXPECT_THROW(apply_setting(c, "decoder", "lstm"), ArgumentError);
  EXPECT_THROW(apply_setting(c, "channels", "1,2"), ArgumentError);
  EXPECT_THROW(parse_config("no equals sign\n"), ArgumentError);
}

}  // namespace
}  // namespace owas
