#include "owas/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "owas/errors.hpp"

namespace owas {

std::vector<FramePrediction> recognize(const Tensor& logits, ConfidenceScore score) {
  expect_rank(logits, 2, "recognize");
  return recognize_batch(Tensor({1, logits.dim(0), logits.dim(1)}, logits.values()), score);
}

std::vector<FramePrediction> recognize_batch(const Tensor& logits, ConfidenceScore score) {
  expect_rank(logits, 3, "recognize_batch");
  if (!logits.all_finite()) throw NumericError("recognize: non-finite logits");
  const int N = logits.dim(0), K = logits.dim(1), T = logits.dim(2);
  if (K < 1) throw ArgumentError("recognize: no classes");
  std::vector<FramePrediction> out;
  out.reserve(static_cast<std::size_t>(N) * T);
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < T; ++t) {
      int best = 0;
      for (int k = 1; k < K; ++k)
        if (logits.at(n, k, t) > logits.at(n, best, t)) best = k;
      const double mx = logits.at(n, best, t);
      double z = 0.0;
      for (int k = 0; k < K; ++k) z += std::exp(logits.at(n, k, t) - mx);
      out.push_back({best, score == ConfidenceScore::MaxSoftmax ? 1.0 / z : mx});
    }
  return out;
}

NoveltyDetector calibrate_threshold(std::span<const double> confidences, double percentile,
                                    ConfidenceScore score) {
  if (confidences.empty()) throw ArgumentError("calibrate_threshold: no validation confidences");
  if (!(percentile > 0.0 && percentile <= 50.0))
    throw ArgumentError("calibrate_threshold: percentile must be in (0, 50]");
  std::vector<double> sorted(confidences.begin(), confidences.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  const auto rank = static_cast<std::size_t>(std::max(1.0, std::ceil(percentile / 100.0 * n - 1e-12)));
  double alpha = sorted[std::min(rank, sorted.size()) - 1];
  if (score == ConfidenceScore::MaxSoftmax) {
    alpha = std::clamp(alpha, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
  }
  return {alpha, score, percentile, sorted.size()};
}

bool detect(double confidence, const NoveltyDetector& detector) { return confidence > detector.alpha; }

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d += (a[k] - b[k]) * (a[k] - b[k]);
  return d;
}

}  // namespace

KMeansResult kmeans(const std::vector<std::vector<double>>& input, int k, std::uint64_t seed,
                    int max_iterations, double tolerance) {
  if (k < 1) throw ArgumentError("kmeans: k must be >= 1");
  if (input.size() < static_cast<std::size_t>(k))
    throw ArgumentError("kmeans: " + std::to_string(input.size()) + " points for " + std::to_string(k) +
                        " clusters");
  const std::size_t dim = input.front().size();
  for (const auto& p : input)
    if (p.size() != dim) throw ArgumentError("kmeans: points differ in dimension");

  std::vector<std::size_t> order(input.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return input[a] < input[b]; });
  std::vector<std::vector<double>> pts;
  pts.reserve(input.size());
  for (std::size_t i : order) pts.push_back(input[i]);

  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> centroids;
  centroids.push_back(pts[rng() % pts.size()]);
  std::vector<double> d2(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) d2[i] = sq_dist(pts[i], centroids[0]);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (centroids.size() < static_cast<std::size_t>(k)) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = 0;
    if (total > 0.0) {
      const double r = unit(rng) * total;
      double acc = 0.0;
      pick = pts.size() - 1;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        acc += d2[i];
        if (acc > r && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    }
    centroids.push_back(pts[pick]);
    for (std::size_t i = 0; i < pts.size(); ++i) d2[i] = std::min(d2[i], sq_dist(pts[i], centroids.back()));
  }

  std::vector<int> assign(pts.size(), 0);
  KMeansResult result;
  for (int iter = 1; iter <= max_iterations; ++iter) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      int best = 0;
      double best_d = sq_dist(pts[i], centroids[0]);
      for (int c = 1; c < k; ++c) {
        const double d = sq_dist(pts[i], centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      assign[i] = best;
    }
    std::vector<std::vector<double>> next(static_cast<std::size_t>(k), std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      ++counts[assign[i]];
      for (std::size_t j = 0; j < dim; ++j) next[assign[i]][j] += pts[i][j];
    }
    double shift = 0.0;
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        next[c] = centroids[c];  // empty cluster keeps its centroid
      } else {
        for (double& x : next[c]) x /= static_cast<double>(counts[c]);
      }
      shift = std::max(shift, std::sqrt(sq_dist(next[c], centroids[c])));
    }
    centroids = std::move(next);
    result.iterations = iter;
    if (shift < tolerance) break;
  }

  result.assignment.assign(input.size(), 0);
  result.inertia = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    int best = 0;
    double best_d = sq_dist(pts[i], centroids[0]);
    for (int c = 1; c < k; ++c) {
      const double d = sq_dist(pts[i], centroids[c]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    result.assignment[order[i]] = best;
    result.inertia += best_d;
  }
  result.centroids = std::move(centroids);
  return result;
}

std::vector<int> hungarian_max(const std::vector<std::vector<double>>& weights) {
  const std::size_t rows = weights.size();
  if (rows == 0) return {};
  const std::size_t cols = weights.front().size();
  for (const auto& r : weights)
    if (r.size() != cols) throw ArgumentError("hungarian_max: ragged weight matrix");
  const std::size_t n = std::max(rows, cols);
  double wmax = 0.0;
  for (const auto& r : weights)
    for (double w : r) wmax = std::max(wmax, w);
  // Square min-cost problem, 1-based, padded cells have weight 0.
  auto cost = [&](std::size_t i, std::size_t j) {
    const double w = (i <= rows && j <= cols) ? weights[i - 1][j - 1] : 0.0;
    return wmax - w;
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> result(rows, -1);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] >= 1 && p[j] <= rows && j <= cols) result[p[j] - 1] = static_cast<int>(j - 1);
  return result;
}

ClusterMapping map_clusters(std::span<const int> cluster_ids, std::span<const int> labels, int num_clusters,
                            std::optional<int> fresh_base) {
  if (cluster_ids.empty()) throw ArgumentError("map_clusters: empty input");
  if (cluster_ids.size() != labels.size()) throw ArgumentError("map_clusters: length mismatch");
  if (num_clusters < 1) throw ArgumentError("map_clusters: need at least one cluster");
  ClusterMapping m;
  m.classes.assign(labels.begin(), labels.end());
  std::sort(m.classes.begin(), m.classes.end());
  m.classes.erase(std::unique(m.classes.begin(), m.classes.end()), m.classes.end());
  m.contingency.assign(static_cast<std::size_t>(num_clusters),
                       std::vector<long long>(m.classes.size(), 0));
  for (std::size_t i = 0; i < cluster_ids.size(); ++i) {
    const int c = cluster_ids[i];
    if (c < 0 || c >= num_clusters) throw ArgumentError("map_clusters: cluster id out of range");
    const auto col = std::lower_bound(m.classes.begin(), m.classes.end(), labels[i]) - m.classes.begin();
    ++m.contingency[c][static_cast<std::size_t>(col)];
  }
  std::vector<std::vector<double>> w(m.contingency.size(), std::vector<double>(m.classes.size()));
  for (std::size_t r = 0; r < w.size(); ++r)
    for (std::size_t c = 0; c < m.classes.size(); ++c) w[r][c] = static_cast<double>(m.contingency[r][c]);
  const std::vector<int> assign = hungarian_max(w);
  int fresh = fresh_base.value_or(m.classes.back() + 1);
  for (int r = 0; r < num_clusters; ++r) {
    m.cluster_to_class[r] = assign[r] >= 0 ? m.classes[static_cast<std::size_t>(assign[r])] : fresh++;
  }
  return m;
}

PipelineResult run_pipeline(Model& model, const std::vector<int>& known_classes,
                            const NoveltyDetector& detector, const std::vector<SkeletonSequence>& sequences,
                            const PipelineOptions& options) {
  if (static_cast<int>(known_classes.size()) != model.config().num_classes)
    throw ArgumentError("run_pipeline: known class list does not match the model");
  if (options.clusters < 1) throw ArgumentError("run_pipeline: M must be >= 1");
  PipelineResult result;
  std::vector<std::vector<double>> novel_points;
  std::vector<std::size_t> novel_frames;
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    const SkeletonSequence& seq = sequences[s];
    const Inference inf = infer(model, seq);
    const std::vector<FramePrediction> preds = recognize(inf.logits, detector.score);
    const int d = inf.embedding_i.dim(0);
    for (int t = 0; t < seq.frames; ++t) {
      FrameOutcome o;
      o.sequence = static_cast<int>(s);
      o.frame = t;
      o.truth = seq.labels[static_cast<std::size_t>(t)];
      o.known_pred = known_classes[static_cast<std::size_t>(preds[t].class_index)];
      o.confidence = preds[t].confidence;
      o.is_known = !options.treat_all_as_novel && detect(o.confidence, detector);
      if (!o.is_known) {
        std::vector<double> f(static_cast<std::size_t>(d));
        for (int k = 0; k < d; ++k) f[k] = inf.embedding_i[static_cast<std::size_t>(k) * seq.frames + t];
        novel_points.push_back(std::move(f));
        novel_frames.push_back(result.frames.size());
      }
      result.frames.push_back(o);
    }
  }
  if (novel_points.empty()) return result;

  const int M = std::min<int>(options.clusters, static_cast<int>(novel_points.size()));
  const KMeansResult km = kmeans(novel_points, M, options.seed);
  for (std::size_t i = 0; i < novel_frames.size(); ++i)
    result.frames[novel_frames[i]].cluster_id = km.assignment[i];

  const int next_id = known_classes.empty() ? 0 : *std::max_element(known_classes.begin(), known_classes.end()) + 1;
  std::vector<int> gt_clusters, gt_labels;
  for (std::size_t i : novel_frames) {
    const FrameOutcome& o = result.frames[i];
    if (std::find(options.novel_classes.begin(), options.novel_classes.end(), o.truth) !=
        options.novel_classes.end()) {
      gt_clusters.push_back(*o.cluster_id);
      gt_labels.push_back(o.truth);
    }
  }
  if (!gt_clusters.empty()) {
    int fresh = next_id;
    for (int c : options.novel_classes) fresh = std::max(fresh, c + 1);
    result.mapping = map_clusters(gt_clusters, gt_labels, M, fresh);
    for (std::size_t i : novel_frames)
      result.frames[i].mapped_label = result.mapping.cluster_to_class.at(*result.frames[i].cluster_id);
  } else {
    for (std::size_t i : novel_frames) result.frames[i].mapped_label = next_id + *result.frames[i].cluster_id;
  }
  return result;
}

void write_outcomes(std::ostream& out, const std::vector<FrameOutcome>& frames) {
  out << "# sequence frame truth known_pred confidence is_known cluster_id mapped_label\n";
  char buf[64];
  for (const FrameOutcome& o : frames) {
    std::snprintf(buf, sizeof buf, "%.17g", o.confidence);
    out << o.sequence << ' ' << o.frame << ' ' << o.truth << ' ' << o.known_pred << ' ' << buf << ' '
        << (o.is_known ? 1 : 0) << ' ';
    if (o.cluster_id) out << *o.cluster_id; else out << '-';
    out << ' ';
    if (o.mapped_label) out << *o.mapped_label; else out << '-';
    out << '\n';
  }
}

std::vector<FrameOutcome> read_outcomes(std::istream& in) {
  std::vector<FrameOutcome> out;
  std::string line;
  std::uint64_t offset = 0;
  while (std::getline(in, line)) {
    const std::uint64_t at = offset;
    offset += line.size() + 1;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    FrameOutcome o;
    int known = 0;
    std::string cluster, mapped;
    if (!(ls >> o.sequence >> o.frame >> o.truth >> o.known_pred >> o.confidence >> known >> cluster >> mapped))
      throw FormatError("malformed outcome record", at);
    o.is_known = known != 0;
    if (cluster != "-") o.cluster_id = std::stoi(cluster);
    if (mapped != "-") o.mapped_label = std::stoi(mapped);
    out.push_back(o);
  }
  return out;
}

}  // namespace owas
