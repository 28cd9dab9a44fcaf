#pragma once

// Central finite-difference checks shared by the gradient tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "owas/autograd.hpp"
#include "owas/params.hpp"
#include "owas/tensor.hpp"

namespace owas::testing {

inline Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = d(rng);
  return t;
}

// ||a - n|| / max(||a|| + ||n||, floor) over one tensor. The floor matters for
// gradients that vanish exactly, such as a bias feeding a normalization layer,
// where both sides are rounding noise of order 1e-10.
inline double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric,
                             double floor = 1e-3) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nn), floor);
}

// Reduces any output to a scalar with fixed random weights so every output
// element contributes its own direction.
struct Projector {
  std::uint64_t seed = 99;
  ad::Var operator()(ad::Tape& tape, ad::Var out) const {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    Tensor w(tape.value(out).shape());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = d(rng);
    return ad::weighted_sum(tape, out, w);
  }
};

using InputFn = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

/// Worst per-input relative error between the tape gradient and central
/// differences of `f` with respect to every element of every input.
inline double input_gradient_error(std::vector<Tensor> inputs, const InputFn& f, double eps = 1e-5) {
  const Projector project;
  auto eval = [&](const std::vector<Tensor>& in) {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const Tensor& t : in) vars.push_back(tape.constant(t));
    return tape.value(project(tape, f(tape, vars)))[0];
  };
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const Tensor& t : inputs) vars.push_back(tape.parameter(t));
  const ad::Var root = project(tape, f(tape, vars));
  tape.backward(root);
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor g = tape.grad(vars[i]);
    std::vector<double> numeric(inputs[i].size());
    for (std::size_t k = 0; k < inputs[i].size(); ++k) {
      const double keep = inputs[i][k];
      inputs[i][k] = keep + eps;
      const double up = eval(inputs);
      inputs[i][k] = keep - eps;
      const double down = eval(inputs);
      inputs[i][k] = keep;
      numeric[k] = (up - down) / (2.0 * eps);
    }
    worst = std::max(worst, relative_error(g.values(), numeric));
  }
  return worst;
}

using ParamFn = std::function<ad::Var(Binding&)>;

struct ParamGradientError {
  double worst = 0.0;
  std::string worst_name;
  int checked_tensors = 0;
};

/// Same check against named parameters. At most `max_per_tensor` evenly spaced
/// elements of each tensor are perturbed. Normalization layers run in training
/// mode (batch statistics), so running-stat updates do not affect the output.
inline ParamGradientError param_gradient_error(Params params, const ParamFn& f, double eps = 1e-5,
                                               std::size_t max_per_tensor = 24) {
  const Projector project;
  auto eval = [&](Params& p) {
    ad::Tape tape;
    Binding b(tape, p, /*trainable=*/false, /*training=*/true);
    return tape.value(project(tape, f(b)))[0];
  };
  ad::Tape tape;
  Params work = params;
  Binding binding(tape, work, /*trainable=*/true, /*training=*/true);
  const ad::Var root = project(tape, f(binding));
  tape.backward(root);
  ParamGradientError out;
  for (const auto& [name, var] : binding.bound()) {
    const Tensor g = tape.grad(var);
    Tensor& t = params.tensors.at(name);
    const std::size_t stride = std::max<std::size_t>(1, t.size() / max_per_tensor);
    std::vector<double> analytic, numeric;
    for (std::size_t k = 0; k < t.size(); k += stride) {
      const double keep = t[k];
      t[k] = keep + eps;
      const double up = eval(params);
      t[k] = keep - eps;
      const double down = eval(params);
      t[k] = keep;
      analytic.push_back(g[k]);
      numeric.push_back((up - down) / (2.0 * eps));
    }
    const double err = relative_error(analytic, numeric);
    ++out.checked_tensors;
    if (err >= out.worst) {
      out.worst = err;
      out.worst_name = name;
    }
  }
  return out;
}

}  // namespace owas::testing
