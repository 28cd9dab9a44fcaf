#pragma once

// Training objective: cross-entropy on soft labels plus the temporal
// clustering loss (intra-class compactness around momentum class means and
// inverse-squared-distance repulsion between means), and Mixup.

#include <map>
#include <random>
#include <vector>

#include "owas/autograd.hpp"
#include "owas/tensor.hpp"

namespace owas {

struct LossConfig {
  double beta = 0.05;        // weight of the clustering terms
  double gamma = 0.9;        // prototype momentum, [0, 1)
  double delta = 1.0;        // margin in the repulsion term, > 0
  double mixup_alpha = 0.2;  // Beta(alpha, alpha) for the mixing weight

  void validate() const;
};

struct ClassPrototype {
  int class_id = 0;
  std::vector<double> mean;
  bool initialized = false;
};

/// One zero-initialized, uninitialized prototype per class id.
std::vector<ClassPrototype> make_prototypes(const std::vector<int>& class_ids, int dim);

/// Frame vectors grouped by class id.
using ClassFrames = std::map<int, std::vector<std::vector<double>>>;

/// mean_i <- gamma * mean_i + (1 - gamma) * batch_mean_i for every class in
/// `frames`; first sight sets the batch mean directly. Absent classes are untouched.
void update_class_means(std::vector<ClassPrototype>& prototypes, const ClassFrames& frames, double gamma);

/// (1 / classes) sum_i (1 / T_i) sum_t ||f_t - mean_i||^2 over the classes in `frames`.
double intra_loss(const ClassFrames& frames, const std::vector<ClassPrototype>& prototypes);

struct InterLoss {
  double value = 0.0;
  bool no_pairs = false;  // fewer than two means: value is 0
};

/// (1 / N) sum_i sum_{j != i} 1 / (||mean_i - mean_j||^2 + delta) over ordered pairs.
InterLoss inter_loss(const std::vector<std::vector<double>>& means, double delta);

struct ClusteringTerms {
  ad::Var terms;  // (2,) = [intra, inter]
  double intra = 0.0;
  double inter = 0.0;
  bool no_pairs = false;
  int classes_present = 0;
};

/// Differentiable clustering terms on embeddings (N, d, T). `frame_class` is
/// (N * T) class ids, -1 for frames excluded from clustering (padding and
/// mixed samples). Each present class uses the in-step mean
/// gamma * prototype + (1 - gamma) * batch_mean, where the stored prototype is
/// a constant and the batch mean carries gradient.
ClusteringTerms clustering_terms(ad::Tape& tape, ad::Var embedding, const std::vector<int>& frame_class,
                                 const std::vector<ClassPrototype>& prototypes, double gamma, double delta);

/// Frames of `embedding` (N, d, T) grouped by `frame_class`, skipping -1.
ClassFrames gather_class_frames(const Tensor& embedding, const std::vector<int>& frame_class);

struct LossBreakdown {
  ad::Var total;
  double total_value = 0.0;
  double ce = 0.0;
  double intra = 0.0;
  double inter = 0.0;
};

/// CE(logits, targets) + beta * (intra + inter). With `clustering` off the
/// clustering terms are neither computed nor reported.
LossBreakdown total_loss(ad::Tape& tape, ad::Var logits, ad::Var embedding, const Tensor& targets,
                         const Tensor& mask, const std::vector<int>& frame_class,
                         const std::vector<ClassPrototype>& prototypes, const LossConfig& config,
                         bool clustering);

struct Mixed {
  Tensor x;
  Tensor y;
};

/// x~ = lambda x_i + (1 - lambda) x_j and the same for the soft labels.
Mixed mixup_pair(const Tensor& x_i, const Tensor& y_i, const Tensor& x_j, const Tensor& y_j, double lambda);

/// Draws lambda ~ Beta(alpha, alpha) as G1 / (G1 + G2) with G ~ Gamma(alpha, 1).
double sample_mixup_lambda(std::mt19937_64& rng, double alpha);

}  // namespace owas
