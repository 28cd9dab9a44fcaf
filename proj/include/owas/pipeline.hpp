#pragma once

// Open-world workflow: recognize known classes, flag low-confidence frames as
// novel, group novel frames into pseudo-classes with K-means and (for
// evaluation) map pseudo-classes onto ground-truth novel classes with the
// Hungarian algorithm.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "owas/model.hpp"
#include "owas/tensor.hpp"

namespace owas {

enum class ConfidenceScore { MaxSoftmax, MaxLogit };

struct FramePrediction {
  int class_index = 0;  // index into the known-class list
  double confidence = 0.0;
};

/// Per frame of (K, T) logits: argmax (lowest index on ties) and its score.
std::vector<FramePrediction> recognize(const Tensor& logits, ConfidenceScore score = ConfidenceScore::MaxSoftmax);

/// Batched form over (N, K, T); results are ordered (n, t).
std::vector<FramePrediction> recognize_batch(const Tensor& logits,
                                             ConfidenceScore score = ConfidenceScore::MaxSoftmax);

struct NoveltyDetector {
  double alpha = 0.5;
  ConfidenceScore score = ConfidenceScore::MaxSoftmax;
  double percentile = 5.0;
  std::size_t calibration_size = 0;
};

/// alpha = nearest-rank lower percentile of in-distribution validation scores:
/// the ceil(p/100 * n)-th smallest value.
NoveltyDetector calibrate_threshold(std::span<const double> confidences, double percentile = 5.0,
                                    ConfidenceScore score = ConfidenceScore::MaxSoftmax);

/// Known iff confidence > alpha.
bool detect(double confidence, const NoveltyDetector& detector);

struct KMeansResult {
  std::vector<int> assignment;
  std::vector<std::vector<double>> centroids;
  double inertia = 0.0;
  int iterations = 0;
};

/// k-means++ seeding then Lloyd iterations until every centroid moves less than
/// `tolerance` or `max_iterations` is reached. Points are processed in sorted
/// order, so the partition does not depend on input order.
KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k, std::uint64_t seed,
                    int max_iterations = 300, double tolerance = 1e-6);

/// Maximum-weight assignment of rows to columns; result[r] is the column of
/// row r or -1 when rows outnumber columns.
std::vector<int> hungarian_max(const std::vector<std::vector<double>>& weights);

struct ClusterMapping {
  std::vector<int> classes;                       // distinct ground-truth labels, sorted
  std::vector<std::vector<long long>> contingency;  // clusters x classes
  std::map<int, int> cluster_to_class;
};

/// Hungarian mapping of cluster ids 0..num_clusters-1 onto the labels they
/// co-occur with most. Clusters left without a label get fresh_base,
/// fresh_base + 1, ... (default: one past the largest label).
ClusterMapping map_clusters(std::span<const int> cluster_ids, std::span<const int> labels, int num_clusters,
                            std::optional<int> fresh_base = std::nullopt);

struct FrameOutcome {
  int sequence = 0;
  int frame = 0;
  int truth = 0;
  int known_pred = 0;  // class id
  double confidence = 0.0;
  bool is_known = true;
  std::optional<int> cluster_id;
  std::optional<int> mapped_label;
};

struct PipelineOptions {
  int clusters = 1;                   // M
  std::uint64_t seed = 1;
  std::vector<int> novel_classes;     // ground truth used only for the Hungarian mapping
  bool treat_all_as_novel = false;    // OOD-classification scenario
};

struct PipelineResult {
  std::vector<FrameOutcome> frames;
  ClusterMapping mapping;
};

/// encode -> decode -> recognize -> detect -> cluster -> map. Without
/// `novel_classes`, novel frames get incremental ids after the largest known class.
PipelineResult run_pipeline(Model& model, const std::vector<int>& known_classes,
                            const NoveltyDetector& detector, const std::vector<SkeletonSequence>& sequences,
                            const PipelineOptions& options);

/// One record per line: sequence frame truth known_pred confidence is_known cluster mapped,
/// with "-" for absent optionals.
void write_outcomes(std::ostream& out, const std::vector<FrameOutcome>& frames);
std::vector<FrameOutcome> read_outcomes(std::istream& in);

}  // namespace owas
