#include "owas/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <tuple>

#include "owas/errors.hpp"

namespace owas {

double frame_accuracy(std::span<const int> pred, std::span<const int> truth, std::span<const std::uint8_t> mask) {
  if (pred.size() != truth.size()) throw ArgumentError("frame_accuracy: length mismatch");
  if (!mask.empty() && mask.size() != pred.size()) throw ArgumentError("frame_accuracy: mask length mismatch");
  long long counted = 0, correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask.empty() && mask[i] == 0) continue;
    ++counted;
    if (pred[i] == truth[i]) ++correct;
  }
  if (counted == 0) throw ArgumentError("frame_accuracy: no unmasked frames");
  return static_cast<double>(correct) / static_cast<double>(counted);
}

SegmentLabeling to_segments(std::span<const int> labels) {
  SegmentLabeling out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (out.segments.empty() || out.segments.back().label != labels[i])
      out.segments.push_back({labels[i], static_cast<int>(i), static_cast<int>(i) + 1});
    else
      out.segments.back().end = static_cast<int>(i) + 1;
  }
  return out;
}

std::vector<int> flatten(const SegmentLabeling& labeling) {
  std::vector<int> out;
  for (const Segment& s : labeling.segments) out.insert(out.end(), static_cast<std::size_t>(s.end - s.start), s.label);
  return out;
}

SegmentCounts segment_counts(const SegmentLabeling& pred, const SegmentLabeling& truth, double k) {
  if (!(k > 0.0 && k <= 100.0)) throw ArgumentError("f1_at_k: k must be in (0, 100]");
  if (pred.length() != truth.length())
    throw ArgumentError("f1_at_k: lengths differ (" + std::to_string(pred.length()) + " vs " +
                        std::to_string(truth.length()) + ")");
  std::vector<const Segment*> ps, ts;
  for (const Segment& s : pred.segments)
    if (s.label != kIgnoreLabel) ps.push_back(&s);
  for (const Segment& s : truth.segments)
    if (s.label != kIgnoreLabel) ts.push_back(&s);

  const double need = k / 100.0;
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < ps.size(); ++i)
    for (std::size_t j = 0; j < ts.size(); ++j) {
      if (ps[i]->label != ts[j]->label) continue;
      const int inter = std::min(ps[i]->end, ts[j]->end) - std::max(ps[i]->start, ts[j]->start);
      if (inter <= 0) continue;
      const int uni = std::max(ps[i]->end, ts[j]->end) - std::min(ps[i]->start, ts[j]->start);
      const double iou = static_cast<double>(inter) / static_cast<double>(uni);
      if (iou >= need) pairs.emplace_back(iou, i, j);
    }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const auto& a, const auto& b) { return std::get<0>(a) > std::get<0>(b); });
  std::vector<char> pu(ps.size(), 0), tu(ts.size(), 0);
  SegmentCounts c;
  for (const auto& [iou, i, j] : pairs) {
    if (pu[i] || tu[j]) continue;
    pu[i] = tu[j] = 1;
    ++c.tp;
  }
  c.fp = static_cast<long long>(ps.size()) - c.tp;
  c.fn = static_cast<long long>(ts.size()) - c.tp;
  return c;
}

double f1_from_counts(const SegmentCounts& c) {
  if (c.tp + c.fp + c.fn == 0) return 1.0;
  if (c.tp == 0) return 0.0;
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
}

double f1_at_k(const SegmentLabeling& pred, const SegmentLabeling& truth, double k) {
  return f1_from_counts(segment_counts(pred, truth, k));
}

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  if (id_scores.empty() || ood_scores.empty()) throw ArgumentError("auroc: both score lists must be non-empty");
  struct Item {
    double score;
    bool id;
  };
  std::vector<Item> all;
  all.reserve(id_scores.size() + ood_scores.size());
  for (double s : id_scores) all.push_back({s, true});
  for (double s : ood_scores) all.push_back({s, false});
  std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.score < b.score; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t q = i; q < j; ++q)
      if (all[q].id) rank_sum += avg;
    i = j;
  }
  const auto n1 = static_cast<double>(id_scores.size());
  const auto n2 = static_cast<double>(ood_scores.size());
  return (rank_sum - n1 * (n1 + 1.0) / 2.0) / (n1 * n2);
}

double acc_ood(std::span<const int> mapped, std::span<const int> truth) {
  if (mapped.empty()) throw ArgumentError("acc_ood: no frames flagged novel with novel ground truth");
  return frame_accuracy(mapped, truth);
}

double h_score(double a, double b) {
  if (!(a >= 0.0 && a <= 1.0) || !(b >= 0.0 && b <= 1.0)) throw ArgumentError("h_score: inputs must be in [0, 1]");
  if (a == 0.0 || b == 0.0) return 0.0;
  return 2.0 / (1.0 / a + 1.0 / b);
}

double openness(int n_train, int n_test, int n_target) {
  if (n_train <= 0 || n_test <= 0 || n_target <= 0) throw ArgumentError("openness: counts must be positive");
  if (2 * n_train > n_test + n_target) throw ArgumentError("openness: 2 * n_train exceeds n_test + n_target");
  return 1.0 - std::sqrt(2.0 * n_train / static_cast<double>(n_test + n_target));
}

void MetricReport::validate() const {
  auto check = [](const std::optional<double>& v, const char* what) {
    if (v && !(*v >= 0.0 && *v <= 1.0)) throw ArgumentError(std::string(what) + " outside [0, 1]");
  };
  check(acc_close, "acc_close");
  check(acc_open, "acc_open");
  check(acc_open_mapped, "acc_open_mapped");
  for (const auto& [k, v] : f1_at) check(v, "f1");
  check(auroc, "auroc");
  check(acc_ood, "acc_ood");
  check(h_score, "h_score");
  check(openness, "openness");
}

namespace {

std::string percent(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v * 100.0);
  return buf;
}

std::optional<double> from_percent(const std::string& s, const std::string& key) {
  if (s == "n/a") return std::nullopt;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw FormatError("value of " + key + " is not a number: '" + s + "'", 0);
  return v / 100.0;
}

// Ordered (key, getter-setter) table shared by the text and CSV forms.
struct Field {
  std::string key;
  std::optional<double> MetricReport::*member = nullptr;
  int f1 = 0;  // nonzero: F1@f1
};

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      {"acc_close", &MetricReport::acc_close, 0},
      {"acc_open", &MetricReport::acc_open, 0},
      {"acc_open_mapped", &MetricReport::acc_open_mapped, 0},
      {"f1@10", nullptr, 10},
      {"f1@25", nullptr, 25},
      {"f1@50", nullptr, 50},
      {"auroc", &MetricReport::auroc, 0},
      {"acc_ood", &MetricReport::acc_ood, 0},
      {"h_score", &MetricReport::h_score, 0},
      {"openness", &MetricReport::openness, 0},
  };
  return f;
}

std::optional<double> get(const MetricReport& r, const Field& f) {
  if (f.member) return r.*f.member;
  auto it = r.f1_at.find(f.f1);
  if (it == r.f1_at.end()) return std::nullopt;
  return it->second;
}

void set(MetricReport& r, const Field& f, std::optional<double> v) {
  if (f.member) {
    r.*f.member = v;
  } else if (v) {
    r.f1_at[f.f1] = *v;
  }
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_commas(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::string format_report(const MetricReport& r) {
  std::ostringstream out;
  out << "name: " << r.name << '\n' << "scenario: " << r.scenario << '\n' << "seed: " << r.seed << '\n';
  for (const Field& f : fields()) out << f.key << ": " << percent(get(r, f)) << '\n';
  return out.str();
}

MetricReport parse_report(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string line = trim(text.substr(start, end - start));
    if (!line.empty() && line[0] != '#') {
      const auto colon = line.find(':');
      if (colon == std::string::npos) throw FormatError("report line without ':': '" + line + "'", start);
      kv[trim(std::string_view(line).substr(0, colon))] = trim(std::string_view(line).substr(colon + 1));
    }
    start = end + 1;
  }
  auto need = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError("report is missing column '" + key + "'", 0);
    return it->second;
  };
  MetricReport r;
  r.name = need("name");
  r.scenario = need("scenario");
  r.seed = std::stoull(need("seed"));
  for (const Field& f : fields()) set(r, f, from_percent(need(f.key), f.key));
  return r;
}

std::string csv_header() {
  std::string h = "name,scenario,seed";
  for (const Field& f : fields()) h += "," + f.key;
  return h;
}

std::string csv_row(const MetricReport& r) {
  std::string row = r.name + "," + r.scenario + "," + std::to_string(r.seed);
  for (const Field& f : fields()) row += "," + percent(get(r, f));
  return row;
}

MetricReport parse_csv_row(std::string_view line) {
  const std::vector<std::string> cols = split_commas(line);
  const std::size_t expected = 3 + fields().size();
  if (cols.size() != expected)
    throw FormatError("metrics row has " + std::to_string(cols.size()) + " columns, expected " +
                          std::to_string(expected),
                      0);
  MetricReport r;
  r.name = cols[0];
  r.scenario = cols[1];
  r.seed = std::stoull(cols[2]);
  for (std::size_t i = 0; i < fields().size(); ++i) set(r, fields()[i], from_percent(cols[3 + i], fields()[i].key));
  return r;
}

std::string render_table(const std::vector<MetricReport>& reports) {
  std::vector<std::string> head = {"config", "scenario", "seed"};
  for (const Field& f : fields()) head.push_back(f.key);
  std::vector<std::vector<std::string>> rows = {head};
  for (const MetricReport& r : reports) {
    std::vector<std::string> row = {r.name, r.scenario, std::to_string(r.seed)};
    for (const Field& f : fields()) {
      const auto v = get(r, f);
      char buf[32];
      if (v) std::snprintf(buf, sizeof buf, "%.2f", *v * 100.0);
      row.push_back(v ? buf : "n/a");
    }
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      if (c) out << "  ";
      const std::string& cell = rows[i][c];
      if (c < 3)
        out << cell << std::string(width[c] - cell.size(), ' ');
      else
        out << std::string(width[c] - cell.size(), ' ') << cell;
    }
    out << '\n';
    if (i == 0) {
      std::size_t total = 0;
      for (std::size_t w : width) total += w + 2;
      out << std::string(total - 2, '-') << '\n';
    }
  }
  return out.str();
}

}  // namespace owas
