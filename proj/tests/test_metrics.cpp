// Frame accuracy, segmental F1@K, AUROC, ACC_OOD, h-score, openness and reports.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "owas/errors.hpp"
#include "owas/metrics.hpp"

namespace owas {
namespace {

SegmentLabeling segs(std::vector<Segment> s) { return {std::move(s)}; }

TEST(FrameAccuracy, Examples) {
  const std::vector<int> a{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, b{1, 2, 3, 4, 5, 0, 0, 0, 0, 0};
  EXPECT_EQ(frame_accuracy(a, a), 1.0);
  EXPECT_EQ(frame_accuracy(a, std::vector<int>(10, 0)), 0.0);
  EXPECT_EQ(frame_accuracy(a, b), 0.5);
  const std::vector<std::uint8_t> mask{1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
  EXPECT_EQ(frame_accuracy(a, b, mask), 1.0);
  EXPECT_THROW(frame_accuracy(a, b, std::vector<std::uint8_t>(10, 0)), ArgumentError);
  EXPECT_THROW(frame_accuracy(a, std::vector<int>{1}), ArgumentError);
}

TEST(Segments, Examples) {
  EXPECT_EQ(to_segments(std::vector<int>{3, 3, 5}), segs({{3, 0, 2}, {5, 2, 3}}));
  EXPECT_EQ(to_segments(std::vector<int>{3}), segs({{3, 0, 1}}));
}

TEST(Segments, RoundTripRandom) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<int> x(1 + rng() % 40);
    for (int& v : x) v = static_cast<int>(rng() % 3);
    const SegmentLabeling s = to_segments(x);
    EXPECT_EQ(flatten(s), x);
    for (std::size_t i = 1; i < s.segments.size(); ++i) {
      EXPECT_EQ(s.segments[i].start, s.segments[i - 1].end);
      EXPECT_NE(s.segments[i].label, s.segments[i - 1].label);
    }
  }
}

TEST(F1, IoUExamples) {
  // Truth is one segment [0, 10); the prediction covers part of it with the
  // rest labelled as a different class.
  const SegmentLabeling truth = segs({{1, 0, 10}});
  const SegmentLabeling head = segs({{1, 0, 5}, {2, 5, 10}});
  const SegmentLabeling tail = segs({{2, 0, 5}, {1, 5, 10}});
  const SegmentLabeling sliver = segs({{2, 0, 8}, {1, 8, 10}});
  for (const SegmentLabeling* p : {&head, &tail}) {
    for (int k : {10, 25, 50}) {
      const SegmentCounts c = segment_counts(*p, truth, k);
      EXPECT_EQ(c.tp, 1) << k;
    }
  }
  EXPECT_EQ(segment_counts(sliver, truth, 10).tp, 1);
  EXPECT_EQ(segment_counts(sliver, truth, 25).tp, 0);
  EXPECT_EQ(segment_counts(sliver, truth, 50).tp, 0);
  // Without the extra class the single-segment case gives F1 = 1.
  EXPECT_EQ(f1_at_k(segs({{1, 0, 5}, {kIgnoreLabel, 5, 10}}), segs({{1, 0, 10}}), 50), 1.0);
}

TEST(F1, IdentityAndEmpty) {
  const SegmentLabeling s = to_segments(std::vector<int>{0, 0, 1, 1, 1, 2, 0});
  for (int k : kF1Thresholds) EXPECT_EQ(f1_at_k(s, s, k), 1.0);
  EXPECT_EQ(f1_from_counts({0, 0, 0}), 1.0);
  EXPECT_EQ(f1_from_counts({0, 3, 2}), 0.0);
  EXPECT_DOUBLE_EQ(f1_from_counts({2, 1, 1}), 4.0 / 6.0);
  // No predictions but non-empty truth.
  EXPECT_EQ(f1_at_k(segs({{kIgnoreLabel, 0, 4}}), segs({{1, 0, 4}}), 10), 0.0);
  EXPECT_THROW(f1_at_k(s, segs({{0, 0, 3}}), 10), ArgumentError);
  EXPECT_THROW(f1_at_k(s, s, 0), ArgumentError);
}

TEST(F1, GreedyOneToOne) {
  // Two predicted segments of class 1 overlap one truth segment; only one matches.
  const SegmentLabeling truth = segs({{1, 0, 10}});
  const SegmentLabeling pred = segs({{1, 0, 6}, {0, 6, 7}, {1, 7, 10}});
  const SegmentCounts c = segment_counts(pred, truth, 10);
  EXPECT_EQ(c.tp, 1);
  EXPECT_EQ(c.fp, 2);
  EXPECT_EQ(c.fn, 0);
}

std::vector<int> random_stream(std::mt19937_64& rng, int T, int classes) {
  std::vector<int> x;
  while (static_cast<int>(x.size()) < T) {
    const int len = 1 + static_cast<int>(rng() % 8), c = static_cast<int>(rng() % classes);
    for (int i = 0; i < len && static_cast<int>(x.size()) < T; ++i) x.push_back(c);
  }
  return x;
}

TEST(F1, AntitoneSymmetricAndRelabelInvariant) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const int T = 10 + static_cast<int>(rng() % 60);
    const auto p = to_segments(random_stream(rng, T, 4)), t = to_segments(random_stream(rng, T, 4));
    const double f10 = f1_at_k(p, t, 10), f25 = f1_at_k(p, t, 25), f50 = f1_at_k(p, t, 50);
    ASSERT_LE(f50, f25);
    ASSERT_LE(f25, f10);
    ASSERT_DOUBLE_EQ(f1_at_k(t, p, 25), f25);
    auto relabel = [](SegmentLabeling s) {
      for (Segment& seg : s.segments) seg.label = 10 + 3 * seg.label;
      return s;
    };
    ASSERT_DOUBLE_EQ(f1_at_k(relabel(p), relabel(t), 50), f50);
  }
}

// Area under the ROC curve of ID-positive scores by sweeping thresholds.
double trapezoid_auroc(std::vector<double> id, std::vector<double> ood) {
  std::vector<double> thresholds = id;
  thresholds.insert(thresholds.end(), ood.begin(), ood.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double area = 0.0, prev_tpr = 0.0, prev_fpr = 0.0;
  for (double th : thresholds) {
    const double tpr = static_cast<double>(std::count_if(id.begin(), id.end(), [&](double s) { return s >= th; })) / id.size();
    const double fpr = static_cast<double>(std::count_if(ood.begin(), ood.end(), [&](double s) { return s >= th; })) / ood.size();
    area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    prev_tpr = tpr;
    prev_fpr = fpr;
  }
  return area;
}

TEST(Auroc, Examples) {
  EXPECT_EQ(auroc(std::vector<double>{0.9, 0.8}, std::vector<double>{0.2, 0.1}), 1.0);
  EXPECT_EQ(auroc(std::vector<double>{0.3, 0.5, 0.7}, std::vector<double>{0.7, 0.3, 0.5}), 0.5);
  EXPECT_THROW(auroc(std::vector<double>{}, std::vector<double>{0.1}), ArgumentError);
}

TEST(Auroc, RankSumEqualsTrapezoid) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> id(1 + rng() % 60), ood(1 + rng() % 60);
    // Coarse grid so that ties occur.
    for (double& s : id) s = static_cast<double>(rng() % 20) / 20.0;
    for (double& s : ood) s = static_cast<double>(rng() % 15) / 20.0;
    EXPECT_NEAR(auroc(id, ood), trapezoid_auroc(id, ood), 1e-9);
  }
}

TEST(Auroc, SwapComplementsWithoutTies) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(20), b(30);
    for (double& s : a) s = u(rng);
    for (double& s : b) s = u(rng);
    EXPECT_NEAR(auroc(a, b) + auroc(b, a), 1.0, 1e-12);
  }
}

TEST(AccOod, Examples) {
  EXPECT_EQ(acc_ood(std::vector<int>{4, 5, 4}, std::vector<int>{4, 5, 4}), 1.0);
  EXPECT_THROW(acc_ood(std::vector<int>{}, std::vector<int>{}), ArgumentError);
}

TEST(HScore, Examples) {
  EXPECT_NEAR(h_score(0.8462, 0.8469), 0.8465, 1e-4);
  EXPECT_NEAR(h_score(0.60, 0.30), 0.40, 1e-15);
  for (double x : {0.1, 0.5, 0.77, 1.0}) EXPECT_NEAR(h_score(x, x), x, 1e-15);
  EXPECT_EQ(h_score(0.0, 0.9), 0.0);
  EXPECT_EQ(h_score(0.9, 0.0), 0.0);
  EXPECT_THROW(h_score(1.2, 0.5), ArgumentError);
}

TEST(HScore, BoundedByArithmeticMean) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double a = u(rng), b = u(rng);
    EXPECT_LE(h_score(a, b), (a + b) / 2.0 + 1e-15);
  }
}

TEST(Openness, Examples) {
  EXPECT_NEAR(openness(11, 14, 11), 1.0 - std::sqrt(22.0 / 25.0), 1e-15);
  EXPECT_NEAR(openness(11, 14, 11), 0.062, 0.001);
  EXPECT_EQ(openness(5, 5, 5), 0.0);
  EXPECT_DOUBLE_EQ(openness(1, 4, 4), 0.5);
  EXPECT_THROW(openness(0, 4, 4), ArgumentError);
  EXPECT_THROW(openness(5, 4, 4), ArgumentError);
}

MetricReport sample_report() {
  MetricReport r;
  r.name = "teu_both";
  r.scenario = "open";
  r.seed = 3;
  r.acc_close = 0.9512345;
  r.acc_open = 0.8;
  r.acc_open_mapped = 0.75;
  r.f1_at = {{10, 0.9}, {25, 0.8}, {50, 0.61}};
  r.auroc = 0.87;
  r.acc_ood = 0.93;
  r.h_score = h_score(0.87, 0.93);
  r.openness = openness(4, 6, 4);
  return r;
}

TEST(Report, TextRoundTrip) {
  const MetricReport r = sample_report();
  const std::string text = format_report(r);
  const MetricReport back = parse_report(text);
  EXPECT_EQ(format_report(back), text);
  EXPECT_EQ(back.name, r.name);
  EXPECT_EQ(back.seed, r.seed);
  EXPECT_NEAR(*back.acc_close, *r.acc_close, 5e-7);
}

TEST(Report, ClosedScenarioMarksNa) {
  MetricReport r;
  r.scenario = "closed";
  r.acc_close = 0.99;
  r.f1_at = {{10, 1.0}, {25, 1.0}, {50, 0.9}};
  const std::string text = format_report(r);
  EXPECT_NE(text.find("auroc: n/a"), std::string::npos);
  EXPECT_NE(text.find("acc_ood: n/a"), std::string::npos);
  EXPECT_NE(text.find("h_score: n/a"), std::string::npos);
  const MetricReport back = parse_report(text);
  EXPECT_FALSE(back.auroc.has_value());
}

TEST(Report, MissingColumn) {
  std::string text = format_report(sample_report());
  const auto at = text.find("auroc:");
  text.erase(at, text.find('\n', at) - at + 1);
  try {
    parse_report(text);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("auroc"), std::string::npos);
  }
}

TEST(Report, CsvRoundTrip) {
  const MetricReport r = sample_report();
  const std::string row = csv_row(r);
  const MetricReport back = parse_csv_row(row);
  EXPECT_EQ(csv_row(back), row);
  const std::string header = csv_header();
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), std::count(header.begin(), header.end(), ','));
  EXPECT_THROW(parse_csv_row("a,b,c"), FormatError);
}

TEST(Report, ValidateRange) {
  MetricReport r = sample_report();
  EXPECT_NO_THROW(r.validate());
  r.auroc = 1.5;
  EXPECT_THROW(r.validate(), ArgumentError);
}

TEST(Report, TableAlignsRows) {
  MetricReport a = sample_report(), b = sample_report();
  b.name = "baseline";
  b.auroc.reset();
  const std::string table = render_table({a, b});
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < table.size()) {
    const auto end = table.find('\n', start);
    lines.push_back(table.substr(start, end - start));
    start = end + 1;
  }
  ASSERT_EQ(lines.size(), 4u);  // header, rule, two rows
  for (const auto& l : lines) EXPECT_EQ(l.size(), lines[0].size());
}

}  // namespace
}  // namespace owas
