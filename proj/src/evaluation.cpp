#include "owas/evaluation.hpp"

#include <algorithm>

#include "owas/errors.hpp"

namespace owas {

NoveltyDetector calibrate_on(Model& model, const std::vector<SkeletonSequence>& validation, double percentile,
                             ConfidenceScore score) {
  std::vector<double> conf;
  for (const SkeletonSequence& s : validation)
    for (const FramePrediction& p : recognize(infer(model, s).logits, score)) conf.push_back(p.confidence);
  return calibrate_threshold(conf, percentile, score);
}

std::map<int, double> pooled_f1(std::span<const int> sequence, std::span<const int> pred, std::span<const int> truth) {
  if (sequence.size() != pred.size() || pred.size() != truth.size()) throw ArgumentError("pooled_f1: length mismatch");
  std::map<int, SegmentCounts> counts;
  std::size_t i = 0;
  while (i < sequence.size()) {
    std::size_t j = i;
    while (j < sequence.size() && sequence[j] == sequence[i]) ++j;
    const SegmentLabeling p = to_segments(pred.subspan(i, j - i));
    const SegmentLabeling t = to_segments(truth.subspan(i, j - i));
    for (int k : kF1Thresholds) counts[k] += segment_counts(p, t, k);
    i = j;
  }
  std::map<int, double> out;
  for (int k : kF1Thresholds) out[k] = f1_from_counts(counts[k]);
  return out;
}

namespace {

bool contains(const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }

MetricReport base_report(const EvalOptions& o, const char* scenario) {
  MetricReport r;
  r.name = o.name;
  r.scenario = scenario;
  r.seed = o.seed;
  return r;
}

std::vector<int> sequence_ids(const std::vector<FrameOutcome>& frames) {
  std::vector<int> out;
  for (const FrameOutcome& f : frames) out.push_back(f.sequence);
  return out;
}

double fraction(long long hit, long long total) {
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace

ScenarioResult evaluate_closed(Model& model, const std::vector<int>& known, const NoveltyDetector& detector,
                               const std::vector<SkeletonSequence>& sequences, const EvalOptions& options) {
  if (sequences.empty()) throw ArgumentError("closed-set scenario: no test sequences");
  ScenarioResult res;
  res.report = base_report(options, "closed");
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    const std::vector<FramePrediction> preds = recognize(infer(model, sequences[s]).logits, detector.score);
    for (int t = 0; t < sequences[s].frames; ++t) {
      FrameOutcome o;
      o.sequence = static_cast<int>(s);
      o.frame = t;
      o.truth = sequences[s].labels[static_cast<std::size_t>(t)];
      o.known_pred = known[static_cast<std::size_t>(preds[t].class_index)];
      o.confidence = preds[t].confidence;
      res.frames.push_back(o);
    }
  }
  std::vector<int> pred, truth;
  for (const FrameOutcome& f : res.frames) {
    pred.push_back(f.known_pred);
    truth.push_back(f.truth);
  }
  res.report.acc_close = frame_accuracy(pred, truth);
  res.report.f1_at = pooled_f1(sequence_ids(res.frames), pred, truth);
  return res;
}

ScenarioResult evaluate_open(Model& model, const std::vector<int>& known, const std::vector<int>& novel,
                             const NoveltyDetector& detector, const std::vector<SkeletonSequence>& sequences,
                             const EvalOptions& options) {
  if (sequences.empty()) throw ArgumentError("open-set scenario: no test sequences");
  PipelineOptions po;
  po.clusters = options.clusters > 0 ? options.clusters : std::max<int>(1, static_cast<int>(novel.size()));
  po.seed = options.seed;
  po.novel_classes = novel;
  ScenarioResult res;
  res.frames = run_pipeline(model, known, detector, sequences, po).frames;
  res.report = base_report(options, "open");

  std::vector<int> unified_pred, unified_truth, mapped_pred, truth;
  std::vector<double> id_conf, ood_conf;
  long long id_frames = 0, id_hits = 0, ood_frames = 0, ood_hits = 0;
  for (const FrameOutcome& f : res.frames) {
    const bool is_novel = contains(novel, f.truth);
    unified_pred.push_back(f.is_known ? f.known_pred : kUnknownLabel);
    unified_truth.push_back(is_novel ? kUnknownLabel : f.truth);
    mapped_pred.push_back(f.is_known ? f.known_pred : f.mapped_label.value_or(kUnknownLabel));
    truth.push_back(f.truth);
    if (is_novel) {
      ood_conf.push_back(f.confidence);
      if (!f.is_known) {
        ++ood_frames;
        if (f.mapped_label == f.truth) ++ood_hits;
      }
    } else {
      id_conf.push_back(f.confidence);
      ++id_frames;
      if (f.known_pred == f.truth) ++id_hits;
    }
  }
  res.report.acc_open = frame_accuracy(unified_pred, unified_truth);
  res.report.acc_open_mapped = frame_accuracy(mapped_pred, truth);
  res.report.f1_at = pooled_f1(sequence_ids(res.frames), unified_pred, unified_truth);
  if (id_frames > 0) res.report.acc_close = fraction(id_hits, id_frames);
  if (!id_conf.empty() && !ood_conf.empty()) res.report.auroc = auroc(id_conf, ood_conf);
  // No novel frame was flagged: nothing was classified correctly.
  if (!ood_conf.empty()) res.report.acc_ood = fraction(ood_hits, ood_frames);
  if (res.report.auroc && res.report.acc_ood) res.report.h_score = h_score(*res.report.auroc, *res.report.acc_ood);
  if (!novel.empty()) {
    const int k = static_cast<int>(known.size());
    res.report.openness = openness(k, k + static_cast<int>(novel.size()), k);
  }
  return res;
}

ScenarioResult evaluate_ood_only(Model& model, const std::vector<int>& known, const std::vector<int>& novel,
                                 const NoveltyDetector& detector, const std::vector<SkeletonSequence>& sequences,
                                 const EvalOptions& options) {
  if (sequences.empty()) throw ArgumentError("OOD-only scenario: no test sequences");
  PipelineOptions po;
  po.clusters = options.clusters > 0 ? options.clusters : std::max<int>(1, static_cast<int>(novel.size()));
  po.seed = options.seed;
  po.novel_classes = novel;
  po.treat_all_as_novel = true;
  ScenarioResult res;
  res.frames = run_pipeline(model, known, detector, sequences, po).frames;
  res.report = base_report(options, "ood");
  std::vector<int> pred, truth;
  for (const FrameOutcome& f : res.frames) {
    pred.push_back(f.mapped_label.value_or(kUnknownLabel));
    truth.push_back(f.truth);
  }
  const double acc = acc_ood(pred, truth);
  res.report.acc_open = acc;
  res.report.acc_ood = acc;
  res.report.f1_at = pooled_f1(sequence_ids(res.frames), pred, truth);
  if (!novel.empty()) {
    const int k = static_cast<int>(known.size());
    res.report.openness = openness(k, k + static_cast<int>(novel.size()), k);
  }
  return res;
}

Evaluation evaluate(Model& model, const OpenWorldSplit& split, const EvalOptions& options) {
  if (split.val.empty()) throw ArgumentError("evaluation needs validation sequences to calibrate alpha");
  Evaluation ev;
  ev.detector = calibrate_on(model, split.val, options.percentile, options.score);
  auto run = [](const char* scenario, auto&& fn) {
    try {
      return fn();
    } catch (const std::exception& e) {
      throw EvaluationError(std::string(scenario) + " scenario: " + e.what());
    }
  };
  const auto& known = split.known_classes;
  const auto& novel = split.novel_classes;
  if (!split.test_closed.empty())
    ev.closed = run("closed-set", [&] { return evaluate_closed(model, known, ev.detector, split.test_closed, options); });
  if (!split.test_open.empty())
    ev.open = run("open-set", [&] { return evaluate_open(model, known, novel, ev.detector, split.test_open, options); });
  if (!split.test_ood_only.empty())
    ev.ood_only = run("OOD-only",
                      [&] { return evaluate_ood_only(model, known, novel, ev.detector, split.test_ood_only, options); });
  return ev;
}

}  // namespace owas
