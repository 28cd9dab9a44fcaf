#pragma once

#include <map>
#include <random>
#include <string>

#include "owas/autograd.hpp"
#include "owas/tensor.hpp"

namespace owas {

/// Named learnable tensors plus the running statistics of every normalization
/// layer. std::map keeps names sorted, which fixes the order in which
/// gradients are gathered and updates are applied.
struct Params {
  std::map<std::string, Tensor> tensors;
  std::map<std::string, ad::BatchNormStats> norms;

  const Tensor& at(const std::string& name) const;
  std::size_t scalar_count() const;
};

/// Puts parameters on a tape on first use and remembers the resulting Vars so
/// gradients can be read back by name.
class Binding {
 public:
  Binding(ad::Tape& tape, Params& params, bool trainable, bool training)
      : tape_(tape), params_(params), trainable_(trainable), training_(training) {}

  ad::Var operator()(const std::string& name);
  ad::BatchNormStats& norm(const std::string& name) { return params_.norms[name]; }

  ad::Tape& tape() noexcept { return tape_; }
  bool training() const noexcept { return training_; }
  bool has(const std::string& name) const { return params_.tensors.contains(name); }
  const std::map<std::string, ad::Var>& bound() const noexcept { return bound_; }

 private:
  ad::Tape& tape_;
  Params& params_;
  bool trainable_;
  bool training_;
  std::map<std::string, ad::Var> bound_;
};

/// He-normal weight initializer writing float-exact values.
class ParamInit {
 public:
  explicit ParamInit(std::uint64_t seed) : rng_(seed) {}

  void weight(Params& p, const std::string& name, std::vector<int> shape, int fan_in);
  void zeros(Params& p, const std::string& name, std::vector<int> shape);
  void ones(Params& p, const std::string& name, std::vector<int> shape);
  /// Affine parameters "<name>.g" / "<name>.b" and running stats for a norm layer.
  void norm(Params& p, const std::string& name, int channels);

 private:
  std::mt19937_64 rng_;
};

}  // namespace owas
