#pragma once

// Deterministic training loop (Nesterov SGD, per-epoch exponential learning
// rate decay, Mixup, class prototypes) and the checkpoint file.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "owas/model.hpp"
#include "owas/objectives.hpp"
#include "owas/skeleton.hpp"

namespace owas {

struct TrainConfig {
  int batch_size = 4;
  int epochs = 60;
  double lr0 = 0.1;
  double lr_decay = 0.95;  // per epoch, (0, 1]
  double momentum = 0.9;
  double weight_decay = 0.001;
  std::uint64_t seed = 1;
  LossConfig loss;
  bool mixup_enabled = true;
  bool tc_loss_enabled = true;
  double mixup_prob = 0.5;  // chance that a sample of the batch is replaced by a mixed one
  double grad_clip = 1.0;   // global L2 norm cap on the gradient; 0 disables

  void validate() const;
};

/// lr0 * lr_decay^epoch, epoch counted from 0.
double learning_rate(const TrainConfig& config, int epoch);

using TensorMap = std::map<std::string, Tensor>;

/// Scales every gradient by max_norm / norm when the global L2 norm exceeds
/// max_norm (> 0). Returns the norm before scaling.
double clip_gradients(TensorMap& grads, double max_norm);

/// Nesterov update for every entry of `params`:
///   v <- mu v - lr (g + wd theta);  theta <- theta + mu v - lr (g + wd theta).
/// A parameter without an entry in `grads` is updated with g = 0. Velocities
/// are created as zeros on first use. Throws NumericError on a non-finite gradient.
void sgd_step(TensorMap& params, const TensorMap& grads, TensorMap& velocity, double lr, double momentum,
              double weight_decay);

struct Checkpoint {
  ModelConfig model;
  std::vector<int> known_classes;  // logit index -> class id
  Params params;
  std::vector<ClassPrototype> prototypes;
  int epoch = -1;  // 0-based epoch after which it was taken; -1 before training
  double val_acc = 0.0;
  double val_loss = 0.0;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;  // training seed
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(std::string_view bytes);

/// Model rebuilt from a checkpoint; the graph is the default skeleton for its joint count.
Model checkpoint_model(const Checkpoint& checkpoint);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;   // mean over steps of the total objective
  double ce = 0.0;
  double intra = 0.0;
  double inter = 0.0;
  double val_acc = 0.0;
  double val_loss = 0.0;
};

std::string epoch_log_header();
std::string epoch_log_row(const EpochLog& row);

struct TrainResult {
  Checkpoint best;
  Checkpoint last;
  std::vector<EpochLog> log;
};

struct ValidationScore {
  double accuracy = 0.0;
  double loss = 0.0;  // frame-averaged cross-entropy
};

/// Eval-mode accuracy and cross-entropy over every frame of `sequences`.
ValidationScore validate_model(Model& model, const std::vector<int>& known_classes,
                               const std::vector<SkeletonSequence>& sequences);

/// FNV-1a over the canonical text of both configurations.
std::uint64_t config_hash(const ModelConfig& model, const TrainConfig& train);

/// Trains on split.train, selects on split.val. model.num_classes is taken from
/// split.known_classes. `on_epoch` (optional) sees each log row as it is produced.
TrainResult train(const OpenWorldSplit& split, ModelConfig model, const TrainConfig& config,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace owas
