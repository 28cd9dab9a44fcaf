#pragma once

// Frame accuracies, segmental F1@K, AUROC, OOD accuracy, h-score, openness,
// and the metric report with its text and CSV forms.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace owas {

/// Frames carrying this label are excluded from segment matching.
inline constexpr int kIgnoreLabel = -2;
/// Unified "unknown" label used for the open-set frame stream.
inline constexpr int kUnknownLabel = -1;

/// Fraction of frames with pred == truth among frames whose mask is nonzero
/// (an empty mask means every frame counts).
double frame_accuracy(std::span<const int> pred, std::span<const int> truth,
                      std::span<const std::uint8_t> mask = {});

struct Segment {
  int label = 0;
  int start = 0;  // inclusive
  int end = 0;    // exclusive

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct SegmentLabeling {
  std::vector<Segment> segments;

  int length() const { return segments.empty() ? 0 : segments.back().end; }
  friend bool operator==(const SegmentLabeling&, const SegmentLabeling&) = default;
};

/// Maximal runs of equal labels.
SegmentLabeling to_segments(std::span<const int> labels);
std::vector<int> flatten(const SegmentLabeling& labeling);

struct SegmentCounts {
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;

  SegmentCounts& operator+=(const SegmentCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

/// Greedy one-to-one matching of same-class segments by descending IoU,
/// accepting pairs with IoU >= k / 100. Segments labeled kIgnoreLabel take no part.
SegmentCounts segment_counts(const SegmentLabeling& pred, const SegmentLabeling& truth, double k);

/// F1 from accumulated counts: 1 when nothing was predicted or expected.
double f1_from_counts(const SegmentCounts& counts);

double f1_at_k(const SegmentLabeling& pred, const SegmentLabeling& truth, double k);

/// P(score of a random ID frame > score of a random OOD frame), ties count 1/2.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

/// Fraction of frames with mapped == truth; throws on empty input.
double acc_ood(std::span<const int> mapped, std::span<const int> truth);

double h_score(double auroc_value, double acc_ood_value);

/// 1 - sqrt(2 n_train / (n_test + n_target)).
double openness(int n_train, int n_test, int n_target);

inline constexpr int kF1Thresholds[] = {10, 25, 50};

struct MetricReport {
  std::string name = "run";  // configuration label, free of commas and whitespace
  std::string scenario;      // closed | open | ood
  std::uint64_t seed = 0;
  std::optional<double> acc_close;
  std::optional<double> acc_open;         // unified-unknown stream
  std::optional<double> acc_open_mapped;  // novel frames scored by mapped pseudo-class
  std::map<int, double> f1_at;            // K -> F1@K
  std::optional<double> auroc;
  std::optional<double> acc_ood;
  std::optional<double> h_score;
  std::optional<double> openness;

  /// Throws ArgumentError unless every present value lies in [0, 1].
  void validate() const;
};

/// "key: value" lines, values as percentages with four decimals, "n/a" when absent.
std::string format_report(const MetricReport& report);
/// Inverse of format_report; a missing key is a FormatError naming it.
MetricReport parse_report(std::string_view text);

std::string csv_header();
std::string csv_row(const MetricReport& report);
/// Parses one data line written by csv_row (header excluded).
MetricReport parse_csv_row(std::string_view line);

/// Fixed-width comparison grid, one row per report.
std::string render_table(const std::vector<MetricReport>& reports);

}  // namespace owas
