#include "owas/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "owas/errors.hpp"

namespace owas {

void LossConfig::validate() const {
  if (!(beta >= 0.0)) throw ArgumentError("beta must be >= 0");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ArgumentError("gamma must be in [0, 1)");
  if (!(delta > 0.0)) throw ArgumentError("delta must be > 0");
  if (!(mixup_alpha > 0.0)) throw ArgumentError("mixup_alpha must be > 0");
}

std::vector<ClassPrototype> make_prototypes(const std::vector<int>& class_ids, int dim) {
  std::vector<ClassPrototype> out;
  for (int c : class_ids) out.push_back({c, std::vector<double>(static_cast<std::size_t>(dim), 0.0), false});
  return out;
}

namespace {

ClassPrototype& find_prototype(std::vector<ClassPrototype>& ps, int class_id) {
  for (auto& p : ps)
    if (p.class_id == class_id) return p;
  throw ArgumentError("no prototype for class " + std::to_string(class_id));
}

const ClassPrototype& find_prototype(const std::vector<ClassPrototype>& ps, int class_id) {
  for (const auto& p : ps)
    if (p.class_id == class_id) return p;
  throw ArgumentError("no prototype for class " + std::to_string(class_id));
}

std::vector<double> frame_mean(const std::vector<std::vector<double>>& frames, std::size_t dim) {
  if (frames.empty()) throw ArgumentError("class present with no frames");
  std::vector<double> m(dim, 0.0);
  for (const auto& f : frames) {
    if (f.size() != dim) throw ArgumentError("embedding dimension mismatch");
    for (std::size_t k = 0; k < dim; ++k) m[k] += f[k];
  }
  for (double& x : m) x /= static_cast<double>(frames.size());
  return m;
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d += (a[k] - b[k]) * (a[k] - b[k]);
  return d;
}

}  // namespace

void update_class_means(std::vector<ClassPrototype>& prototypes, const ClassFrames& frames, double gamma) {
  for (const auto& [class_id, list] : frames) {
    ClassPrototype& p = find_prototype(prototypes, class_id);
    const std::vector<double> m = frame_mean(list, p.mean.size());
    const double g = p.initialized ? gamma : 0.0;
    for (std::size_t k = 0; k < m.size(); ++k) p.mean[k] = g * p.mean[k] + (1.0 - g) * m[k];
    p.initialized = true;
  }
}

double intra_loss(const ClassFrames& frames, const std::vector<ClassPrototype>& prototypes) {
  if (frames.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [class_id, list] : frames) {
    const ClassPrototype& p = find_prototype(prototypes, class_id);
    if (!p.initialized) throw StateError("prototype of class " + std::to_string(class_id) + " is uninitialized");
    if (list.empty()) throw ArgumentError("class present with no frames");
    double sum = 0.0;
    for (const auto& f : list) {
      if (f.size() != p.mean.size()) throw ArgumentError("embedding dimension mismatch");
      sum += squared_distance(f, p.mean);
    }
    total += sum / static_cast<double>(list.size());
  }
  return total / static_cast<double>(frames.size());
}

InterLoss inter_loss(const std::vector<std::vector<double>>& means, double delta) {
  if (means.size() < 2) return {0.0, true};
  double total = 0.0;
  for (std::size_t i = 0; i < means.size(); ++i)
    for (std::size_t j = 0; j < means.size(); ++j) {
      if (i == j) continue;
      if (means[i].size() != means[j].size()) throw ArgumentError("prototype dimension mismatch");
      total += 1.0 / (squared_distance(means[i], means[j]) + delta);
    }
  return {total / static_cast<double>(means.size()), false};
}

ClassFrames gather_class_frames(const Tensor& embedding, const std::vector<int>& frame_class) {
  expect_rank(embedding, 3, "gather_class_frames");
  const int N = embedding.dim(0), d = embedding.dim(1), T = embedding.dim(2);
  if (frame_class.size() != static_cast<std::size_t>(N) * T)
    throw ArgumentError("frame_class size must be N * T");
  ClassFrames out;
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < T; ++t) {
      const int c = frame_class[static_cast<std::size_t>(n) * T + t];
      if (c < 0) continue;
      std::vector<double> f(static_cast<std::size_t>(d));
      for (int k = 0; k < d; ++k) f[k] = embedding.at(n, k, t);
      out[c].push_back(std::move(f));
    }
  return out;
}

ClusteringTerms clustering_terms(ad::Tape& tape, ad::Var embedding, const std::vector<int>& frame_class,
                                 const std::vector<ClassPrototype>& prototypes, double gamma, double delta) {
  const Tensor& ev = tape.value(embedding);
  expect_rank(ev, 3, "clustering_terms");
  const int N = ev.dim(0), d = ev.dim(1), T = ev.dim(2);
  if (frame_class.size() != static_cast<std::size_t>(N) * T)
    throw ArgumentError("frame_class size must be N * T");

  // Per present class: member frame indices (n * T + t), momentum weight and in-step mean.
  struct Group {
    int class_id;
    std::vector<std::size_t> frames;
    double keep;  // gamma, or 0 for an uninitialized prototype
    std::vector<double> mean;
  };
  std::map<int, std::size_t> index;
  auto groups = std::make_shared<std::vector<Group>>();
  for (std::size_t f = 0; f < frame_class.size(); ++f) {
    const int c = frame_class[f];
    if (c < 0) continue;
    auto [it, inserted] = index.emplace(c, groups->size());
    if (inserted) {
      const ClassPrototype& p = find_prototype(prototypes, c);
      if (static_cast<int>(p.mean.size()) != d) throw ArgumentError("prototype dimension mismatch");
      groups->push_back({c, {}, p.initialized ? gamma : 0.0, p.mean});
    }
    (*groups)[it->second].frames.push_back(f);
  }

  auto col = [&](std::size_t f, int k) {
    const std::size_t n = f / static_cast<std::size_t>(T), t = f % static_cast<std::size_t>(T);
    return ev.at(static_cast<int>(n), k, static_cast<int>(t));
  };

  ClusteringTerms out;
  out.classes_present = static_cast<int>(groups->size());
  for (Group& g : *groups) {
    std::vector<double> m(static_cast<std::size_t>(d), 0.0);
    for (std::size_t f : g.frames)
      for (int k = 0; k < d; ++k) m[k] += col(f, k);
    for (int k = 0; k < d; ++k) {
      m[k] /= static_cast<double>(g.frames.size());
      g.mean[k] = g.keep * g.mean[k] + (1.0 - g.keep) * m[k];
    }
  }
  const double G = static_cast<double>(groups->size());
  double intra = 0.0;
  for (const Group& g : *groups) {
    double sum = 0.0;
    for (std::size_t f : g.frames)
      for (int k = 0; k < d; ++k) sum += (col(f, k) - g.mean[k]) * (col(f, k) - g.mean[k]);
    intra += sum / static_cast<double>(g.frames.size());
  }
  if (!groups->empty()) intra /= G;
  std::vector<std::vector<double>> means;
  for (const Group& g : *groups) means.push_back(g.mean);
  const InterLoss inter = inter_loss(means, delta);
  out.intra = intra;
  out.inter = inter.value;
  out.no_pairs = inter.no_pairs;

  out.terms = tape.record(
      Tensor({2}, std::vector<double>{intra, inter.value}), {embedding},
      [embedding, groups, d, T, delta](ad::Tape& tp, ad::Var, const Tensor& g) {
        Tensor* de = tp.grad_sink(embedding);
        const Tensor& ev = tp.value(embedding);
        const std::size_t G = groups->size();
        if (G == 0) return;
        auto at = [&](Tensor& t, std::size_t f, int k) -> double& {
          return t.at(static_cast<int>(f / T), k, static_cast<int>(f % T));
        };
        // dL/dmean_i from both terms; mean_i depends on frame f through (1 - keep) / T_i.
        std::vector<std::vector<double>> dmean(G, std::vector<double>(static_cast<std::size_t>(d), 0.0));
        for (std::size_t i = 0; i < G; ++i) {
          const auto& gi = (*groups)[i];
          const double scale = g[0] / static_cast<double>(G) / static_cast<double>(gi.frames.size());
          for (std::size_t f : gi.frames)
            for (int k = 0; k < d; ++k) {
              const double diff = ev.at(static_cast<int>(f / T), k, static_cast<int>(f % T)) - gi.mean[k];
              at(*de, f, k) += scale * 2.0 * diff;
              dmean[i][k] -= scale * 2.0 * diff;
            }
          if (G < 2) continue;
          for (std::size_t j = 0; j < G; ++j) {
            if (j == i) continue;
            const auto& gj = (*groups)[j];
            double dist = 0.0;
            for (int k = 0; k < d; ++k) dist += (gi.mean[k] - gj.mean[k]) * (gi.mean[k] - gj.mean[k]);
            const double w = -4.0 * g[1] / static_cast<double>(G) / ((dist + delta) * (dist + delta));
            for (int k = 0; k < d; ++k) dmean[i][k] += w * (gi.mean[k] - gj.mean[k]);
          }
        }
        for (std::size_t i = 0; i < G; ++i) {
          const auto& gi = (*groups)[i];
          const double through = (1.0 - gi.keep) / static_cast<double>(gi.frames.size());
          for (std::size_t f : gi.frames)
            for (int k = 0; k < d; ++k) at(*de, f, k) += through * dmean[i][k];
        }
      });
  return out;
}

LossBreakdown total_loss(ad::Tape& tape, ad::Var logits, ad::Var embedding, const Tensor& targets,
                         const Tensor& mask, const std::vector<int>& frame_class,
                         const std::vector<ClassPrototype>& prototypes, const LossConfig& config,
                         bool clustering) {
  LossBreakdown out;
  const ad::Var ce = ad::soft_cross_entropy(tape, logits, targets, mask);
  out.ce = tape.value(ce)[0];
  out.total = ce;
  if (clustering) {
    const ClusteringTerms terms = clustering_terms(tape, embedding, frame_class, prototypes, config.gamma,
                                                   config.delta);
    out.intra = terms.intra;
    out.inter = terms.inter;
    const ad::Var weighted =
        ad::weighted_sum(tape, terms.terms, Tensor({2}, std::vector<double>{config.beta, config.beta}));
    out.total = ad::add(tape, ce, weighted);
  }
  out.total_value = tape.value(out.total)[0];
  return out;
}

Mixed mixup_pair(const Tensor& x_i, const Tensor& y_i, const Tensor& x_j, const Tensor& y_j, double lambda) {
  if (!x_i.same_shape(x_j) || !y_i.same_shape(y_j))
    throw ArgumentError("mixup_pair: shape mismatch " + shape_string(x_i.shape()) + " vs " +
                        shape_string(x_j.shape()));
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ArgumentError("mixup_pair: lambda must be in [0, 1]");
  Mixed m{x_i, y_i};
  for (std::size_t k = 0; k < m.x.size(); ++k) m.x[k] = lambda * x_i[k] + (1.0 - lambda) * x_j[k];
  for (std::size_t k = 0; k < m.y.size(); ++k) m.y[k] = lambda * y_i[k] + (1.0 - lambda) * y_j[k];
  return m;
}

double sample_mixup_lambda(std::mt19937_64& rng, double alpha) {
  if (!(alpha > 0.0)) throw ArgumentError("mixup alpha must be > 0");
  std::gamma_distribution<double> gamma(alpha, 1.0);
  const double a = gamma(rng);
  const double b = gamma(rng);
  if (a + b <= 0.0) return 0.5;
  return a / (a + b);
}

}  // namespace owas
