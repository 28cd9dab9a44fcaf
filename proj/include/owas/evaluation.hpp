#pragma once

// The three evaluation scenarios: closed-set test, open-set test (known and
// novel classes mixed) and OOD-only classification.

#include <string>
#include <vector>

#include "owas/metrics.hpp"
#include "owas/model.hpp"
#include "owas/pipeline.hpp"
#include "owas/skeleton.hpp"

namespace owas {

struct EvalOptions {
  double percentile = 5.0;
  ConfidenceScore score = ConfidenceScore::MaxSoftmax;
  int clusters = 0;  // M; 0 means the number of novel classes
  std::uint64_t seed = 1;
  std::string name = "run";
};

struct ScenarioResult {
  MetricReport report;
  std::vector<FrameOutcome> frames;
};

struct Evaluation {
  NoveltyDetector detector;
  ScenarioResult closed;
  ScenarioResult open;
  ScenarioResult ood_only;
};

/// Threshold from the confidences of every validation frame.
NoveltyDetector calibrate_on(Model& model, const std::vector<SkeletonSequence>& validation, double percentile,
                             ConfidenceScore score);

/// F1@K over per-sequence segmentations of two frame streams, counts pooled
/// across sequences. `sequence` gives each frame's sequence index.
std::map<int, double> pooled_f1(std::span<const int> sequence, std::span<const int> pred, std::span<const int> truth);

ScenarioResult evaluate_closed(Model& model, const std::vector<int>& known, const NoveltyDetector& detector,
                               const std::vector<SkeletonSequence>& sequences, const EvalOptions& options);
ScenarioResult evaluate_open(Model& model, const std::vector<int>& known, const std::vector<int>& novel,
                             const NoveltyDetector& detector, const std::vector<SkeletonSequence>& sequences,
                             const EvalOptions& options);
ScenarioResult evaluate_ood_only(Model& model, const std::vector<int>& known, const std::vector<int>& novel,
                                 const NoveltyDetector& detector, const std::vector<SkeletonSequence>& sequences,
                                 const EvalOptions& options);

/// Calibrates on split.val, then runs every scenario whose test set is non-empty.
Evaluation evaluate(Model& model, const OpenWorldSplit& split, const EvalOptions& options);

}  // namespace owas
