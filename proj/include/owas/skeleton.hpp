#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <utility>
#include <vector>

#include "owas/tensor.hpp"

namespace owas {

/// One untrimmed recording: joint coordinates laid out (3, T, V) row-major,
/// plus a dense per-frame action label.
struct SkeletonSequence {
  int frames = 0;
  int joints = 0;
  std::vector<float> coords;
  std::vector<int> labels;
  int subject_id = 0;

  float coord(int axis, int t, int v) const {
    return coords[(static_cast<std::size_t>(axis) * frames + t) * joints + v];
  }

  /// Throws ArgumentError unless the sizes, finiteness and label invariants hold.
  void validate() const;

  friend bool operator==(const SkeletonSequence&, const SkeletonSequence&) = default;
};

/// Joint topology with the normalized adjacency D^-1/2 (A + I) D^-1/2.
struct SkeletonGraph {
  int num_joints = 0;
  std::vector<std::pair<int, int>> edges;
  Tensor adjacency;

  static SkeletonGraph from_edges(int num_joints, std::vector<std::pair<int, int>> edges);

  /// Spine over the first ceil(V/2) joints (i-1, i); every remaining joint k is
  /// attached to spine joint k - ceil(V/2).
  static SkeletonGraph chain_with_branches(int num_joints);
};

struct OpenWorldSplit {
  std::vector<int> known_classes;
  std::vector<int> novel_classes;
  std::vector<SkeletonSequence> train;
  std::vector<SkeletonSequence> val;
  std::vector<SkeletonSequence> test_closed;
  std::vector<SkeletonSequence> test_open;
  std::vector<SkeletonSequence> test_ood_only;
};

struct SynthOptions {
  std::uint64_t seed = 1;
  int num_classes = 6;
  int frames_per_segment = 16;
  int joints = 8;
  double noise_std = 0.05;
  int num_sequences = 200;
  int min_segments = 2;
  int max_segments = 6;
};

/// Per-class motion archetype: a class-specific static posture offset plus a
/// sinusoid with class-specific period, per-joint amplitudes and phases.
struct MotionArchetype {
  int period = 0;
  std::vector<double> offset;     // (3, V)
  std::vector<double> amplitude;  // (3, V)
  std::vector<double> phase;      // (V)
};

/// Archetype of `class_id` for a V-joint skeleton. Depends only on the class
/// id and V, so a class looks the same in every generated dataset.
MotionArchetype motion_archetype(int class_id, int joints);

/// Rest pose shared by all classes, (3, V).
std::vector<double> rest_pose(int joints);

/// Noise-free coordinate of `archetype` at phase `tau` frames into its cycle.
double archetype_coord(const MotionArchetype& archetype, const std::vector<double>& rest,
                       int joints, int axis, int joint, int tau);

std::vector<SkeletonSequence> generate_synthetic(const SynthOptions& options);

/// Sequences containing no novel frame are split in file order into train,
/// val and test_closed by `train_ratio` / `val_ratio`; every sequence not used
/// for training or validation goes to test_open.
OpenWorldSplit make_split(const std::vector<SkeletonSequence>& sequences,
                          const std::set<int>& novel_classes, double train_ratio,
                          double val_ratio);

void save_dataset(const std::filesystem::path& path, const std::vector<SkeletonSequence>& sequences);
std::vector<SkeletonSequence> load_dataset(const std::filesystem::path& path);

/// Sorted distinct labels appearing in `sequences`.
std::vector<int> observed_labels(const std::vector<SkeletonSequence>& sequences);

}  // namespace owas
