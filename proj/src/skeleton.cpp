#include "owas/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "binary_io.hpp"
#include "owas/errors.hpp"

namespace owas {

void SkeletonSequence::validate() const {
  if (frames < 1 || joints < 1) throw ArgumentError("skeleton sequence needs T >= 1 and V >= 1");
  if (coords.size() != static_cast<std::size_t>(3) * frames * joints)
    throw ArgumentError("skeleton coords size does not match (3, T, V)");
  if (labels.size() != static_cast<std::size_t>(frames))
    throw ArgumentError("skeleton labels size does not match T");
  for (float c : coords)
    if (!std::isfinite(c)) throw ArgumentError("skeleton coords contain a non-finite value");
  for (int l : labels)
    if (l < 0) throw ArgumentError("skeleton label must be non-negative");
}

SkeletonGraph SkeletonGraph::from_edges(int num_joints, std::vector<std::pair<int, int>> edges) {
  if (num_joints < 1) throw ArgumentError("graph needs at least one joint");
  Tensor a({num_joints, num_joints}, 0.0);
  for (int v = 0; v < num_joints; ++v) a[static_cast<std::size_t>(v) * num_joints + v] = 1.0;
  for (auto [i, j] : edges) {
    if (i < 0 || j < 0 || i >= num_joints || j >= num_joints || i == j)
      throw ArgumentError("invalid edge (" + std::to_string(i) + ", " + std::to_string(j) + ")");
    a[static_cast<std::size_t>(i) * num_joints + j] = 1.0;
    a[static_cast<std::size_t>(j) * num_joints + i] = 1.0;
  }
  std::vector<double> inv_sqrt_deg(static_cast<std::size_t>(num_joints));
  for (int i = 0; i < num_joints; ++i) {
    double d = 0.0;
    for (int j = 0; j < num_joints; ++j) d += a[static_cast<std::size_t>(i) * num_joints + j];
    inv_sqrt_deg[i] = 1.0 / std::sqrt(d);
  }
  for (int i = 0; i < num_joints; ++i)
    for (int j = 0; j < num_joints; ++j)
      a[static_cast<std::size_t>(i) * num_joints + j] *= inv_sqrt_deg[i] * inv_sqrt_deg[j];
  return SkeletonGraph{num_joints, std::move(edges), std::move(a)};
}

SkeletonGraph SkeletonGraph::chain_with_branches(int num_joints) {
  if (num_joints < 1) throw ArgumentError("graph needs at least one joint");
  const int spine = (num_joints + 1) / 2;
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i < spine; ++i) edges.emplace_back(i - 1, i);
  for (int k = spine; k < num_joints; ++k) edges.emplace_back(k - spine, k);
  return from_edges(num_joints, std::move(edges));
}

std::vector<double> rest_pose(int joints) {
  const int spine = (joints + 1) / 2;
  std::vector<double> pose(static_cast<std::size_t>(3) * joints, 0.0);
  for (int v = 0; v < joints; ++v) {
    const bool branch = v >= spine;
    pose[v] = branch ? 0.3 : 0.0;                                   // x
    pose[static_cast<std::size_t>(joints) + v] = 0.25 * (branch ? v - spine : v);  // y
  }
  return pose;
}

MotionArchetype motion_archetype(int class_id, int joints) {
  if (class_id < 0 || joints < 1) throw ArgumentError("invalid archetype request");
  std::mt19937_64 rng(0x5EED0000ULL + 7919ULL * static_cast<std::uint64_t>(class_id));
  std::uniform_real_distribution<double> offset(-0.15, 0.15);
  std::uniform_real_distribution<double> amp(0.05, 0.3);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  MotionArchetype a;
  a.period = 8 + static_cast<int>(rng() % 13);
  a.offset.resize(static_cast<std::size_t>(3) * joints);
  a.amplitude.resize(static_cast<std::size_t>(3) * joints);
  a.phase.resize(static_cast<std::size_t>(joints));
  for (double& o : a.offset) o = offset(rng);
  for (double& x : a.amplitude) x = amp(rng);
  for (double& p : a.phase) p = phase(rng);
  return a;
}

double archetype_coord(const MotionArchetype& archetype, const std::vector<double>& rest,
                       int joints, int axis, int joint, int tau) {
  const std::size_t i = static_cast<std::size_t>(axis) * joints + joint;
  const double w = 2.0 * std::numbers::pi / archetype.period;
  return rest[i] + archetype.offset[i] +
         archetype.amplitude[i] * std::sin(w * tau + archetype.phase[static_cast<std::size_t>(joint)]);
}

std::vector<SkeletonSequence> generate_synthetic(const SynthOptions& o) {
  if (o.num_classes < 2) throw ArgumentError("generate_synthetic: num_classes must be >= 2");
  if (o.frames_per_segment < 4) throw ArgumentError("generate_synthetic: frames_per_segment must be >= 4");
  if (o.joints < 1) throw ArgumentError("generate_synthetic: joints must be >= 1");
  if (!(o.noise_std >= 0.0)) throw ArgumentError("generate_synthetic: noise_std must be >= 0");
  if (o.num_sequences < 0) throw ArgumentError("generate_synthetic: num_sequences must be >= 0");
  if (o.min_segments < 1 || o.max_segments < o.min_segments)
    throw ArgumentError("generate_synthetic: invalid segment range");

  const int V = o.joints;
  std::vector<MotionArchetype> archetypes;
  for (int c = 0; c < o.num_classes; ++c) archetypes.push_back(motion_archetype(c, V));
  const std::vector<double> rest = rest_pose(V);

  std::mt19937_64 rng(o.seed);
  std::uniform_int_distribution<int> seg_count(o.min_segments, o.max_segments);
  std::uniform_int_distribution<int> subject(0, 5);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<SkeletonSequence> out;
  out.reserve(static_cast<std::size_t>(o.num_sequences));
  for (int s = 0; s < o.num_sequences; ++s) {
    const int segments = seg_count(rng);
    std::vector<int> classes;
    std::vector<int> offsets;
    for (int k = 0; k < segments; ++k) {
      int c = static_cast<int>(rng() % static_cast<std::uint64_t>(o.num_classes));
      // adjacent segments differ so every segment is a maximal run
      if (!classes.empty() && c == classes.back())
        c = (c + 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(o.num_classes - 1))) % o.num_classes;
      classes.push_back(c);
      offsets.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(archetypes[c].period)));
    }
    SkeletonSequence seq;
    seq.frames = segments * o.frames_per_segment;
    seq.joints = V;
    seq.subject_id = subject(rng);
    seq.coords.resize(static_cast<std::size_t>(3) * seq.frames * V);
    seq.labels.resize(static_cast<std::size_t>(seq.frames));
    for (int t = 0; t < seq.frames; ++t) seq.labels[t] = classes[t / o.frames_per_segment];
    for (int axis = 0; axis < 3; ++axis)
      for (int t = 0; t < seq.frames; ++t) {
        const int k = t / o.frames_per_segment;
        const int tau = t % o.frames_per_segment + offsets[k];
        for (int v = 0; v < V; ++v) {
          double value = archetype_coord(archetypes[classes[k]], rest, V, axis, v, tau);
          if (o.noise_std > 0.0) value += o.noise_std * noise(rng);
          seq.coords[(static_cast<std::size_t>(axis) * seq.frames + t) * V + v] = static_cast<float>(value);
        }
      }
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<int> observed_labels(const std::vector<SkeletonSequence>& sequences) {
  std::set<int> seen;
  for (const auto& s : sequences) seen.insert(s.labels.begin(), s.labels.end());
  return {seen.begin(), seen.end()};
}

OpenWorldSplit make_split(const std::vector<SkeletonSequence>& sequences,
                          const std::set<int>& novel_classes, double train_ratio, double val_ratio) {
  if (!(train_ratio > 0.0) || !(val_ratio > 0.0) || !(train_ratio + val_ratio < 1.0))
    throw ArgumentError("make_split: ratios must be positive with sum < 1");
  const std::vector<int> observed = observed_labels(sequences);
  for (int c : novel_classes)
    if (!std::binary_search(observed.begin(), observed.end(), c))
      throw ArgumentError("make_split: novel class " + std::to_string(c) + " never observed");

  OpenWorldSplit split;
  split.novel_classes.assign(novel_classes.begin(), novel_classes.end());
  for (int c : observed)
    if (!novel_classes.contains(c)) split.known_classes.push_back(c);

  auto has_novel = [&](const SkeletonSequence& s) {
    return std::any_of(s.labels.begin(), s.labels.end(), [&](int l) { return novel_classes.contains(l); });
  };
  auto all_novel = [&](const SkeletonSequence& s) {
    return std::all_of(s.labels.begin(), s.labels.end(), [&](int l) { return novel_classes.contains(l); });
  };

  std::size_t pure = 0;
  for (const auto& s : sequences) pure += has_novel(s) ? 0 : 1;
  const auto n_train = static_cast<std::size_t>(std::llround(train_ratio * static_cast<double>(pure)));
  const auto n_val = std::min(pure - n_train,
                              static_cast<std::size_t>(std::llround(val_ratio * static_cast<double>(pure))));

  std::size_t seen_pure = 0;
  for (const auto& s : sequences) {
    if (!has_novel(s)) {
      if (seen_pure < n_train) {
        split.train.push_back(s);
      } else if (seen_pure < n_train + n_val) {
        split.val.push_back(s);
      } else {
        split.test_closed.push_back(s);
        split.test_open.push_back(s);
      }
      ++seen_pure;
    } else {
      split.test_open.push_back(s);
      if (all_novel(s)) split.test_ood_only.push_back(s);
    }
  }
  return split;
}

void save_dataset(const std::filesystem::path& path, const std::vector<SkeletonSequence>& sequences) {
  const int V = sequences.empty() ? 0 : sequences.front().joints;
  std::string out = "OWAS1\ncount:" + std::to_string(sequences.size()) + "\nV:" + std::to_string(V) + "\nT:";
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    sequences[i].validate();
    if (sequences[i].joints != V) throw ArgumentError("save_dataset: all sequences must share V");
    out += (i ? "," : "") + std::to_string(sequences[i].frames);
  }
  out += "\nsubject:";
  for (std::size_t i = 0; i < sequences.size(); ++i)
    out += (i ? "," : "") + std::to_string(sequences[i].subject_id);
  out += "\nend\n";
  for (const auto& s : sequences) {
    for (float c : s.coords) io::put_f32(out, c);
    for (int l : s.labels) io::put_i32(out, l);
  }
  io::write_file(path, out);
}

std::vector<SkeletonSequence> load_dataset(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  io::Cursor cur(bytes);
  if (cur.line("magic") != "OWAS1") throw FormatError("bad magic, expected OWAS1", 0);
  std::uint64_t at = cur.offset();
  const long long count = io::parse_int(io::expect_key(cur.line("count"), "count", at), at);
  at = cur.offset();
  const long long V = io::parse_int(io::expect_key(cur.line("V"), "V", at), at);
  at = cur.offset();
  const auto frames = io::split(io::expect_key(cur.line("T"), "T", at), ',');
  const std::uint64_t t_at = at;
  at = cur.offset();
  const auto subjects = io::split(io::expect_key(cur.line("subject"), "subject", at), ',');
  const std::uint64_t s_at = at;
  at = cur.offset();
  if (cur.line("end") != "end") throw FormatError("missing header terminator", at);
  if (count < 0 || static_cast<long long>(frames.size()) != count ||
      static_cast<long long>(subjects.size()) != count)
    throw FormatError("header count does not match per-sequence lists", t_at);
  if (count > 0 && V < 1) throw FormatError("V must be positive", t_at);

  std::vector<SkeletonSequence> out;
  out.reserve(static_cast<std::size_t>(count));
  for (long long i = 0; i < count; ++i) {
    SkeletonSequence s;
    s.frames = static_cast<int>(io::parse_int(frames[static_cast<std::size_t>(i)], t_at));
    s.joints = static_cast<int>(V);
    s.subject_id = static_cast<int>(io::parse_int(subjects[static_cast<std::size_t>(i)], s_at));
    if (s.frames < 1) throw FormatError("sequence length must be positive", t_at);
    s.coords.resize(static_cast<std::size_t>(3) * s.frames * s.joints);
    s.labels.resize(static_cast<std::size_t>(s.frames));
    for (float& c : s.coords) c = cur.f32("coordinates");
    for (int& l : s.labels) {
      const std::uint64_t label_at = cur.offset();
      l = cur.i32("labels");
      if (l < 0) throw FormatError("negative label", label_at);
    }
    out.push_back(std::move(s));
  }
  if (!cur.at_end()) throw FormatError("trailing bytes after last sequence", cur.offset());
  return out;
}

}  // namespace owas
