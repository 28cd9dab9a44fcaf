#pragma once

// Flat "key = value" run configuration. Keys are the field names of
// TrainConfig, LossConfig and ModelConfig plus the split and evaluation knobs:
//
//   batch_size epochs lr0 lr_decay momentum weight_decay seed mixup_enabled
//   tc_loss_enabled mixup_prob grad_clip beta gamma delta mixup_alpha channels
//   temporal_kernel hidden embedding decoder batch_norm init_seed
//   train_ratio val_ratio percentile score clusters
//
// Lines starting with '#' are comments. Booleans are true/false or 1/0;
// channels is three comma-separated widths; decoder is teu or tpp; score is
// softmax or logit.

#include <string>
#include <string_view>

#include "owas/model.hpp"
#include "owas/pipeline.hpp"
#include "owas/trainer.hpp"

namespace owas {

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  double train_ratio = 0.6;
  double val_ratio = 0.2;
  double percentile = 5.0;
  ConfidenceScore score = ConfidenceScore::MaxSoftmax;
  int clusters = 0;  // 0: number of novel classes
};

/// Sets one key; throws ArgumentError naming the key on an unknown key or bad value.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Parses a whole file body; errors carry the line number.
RunConfig parse_config(std::string_view text, RunConfig base = {});

/// Every key with its current value, one per line, parseable by parse_config.
std::string format_config(const RunConfig& config);

}  // namespace owas
