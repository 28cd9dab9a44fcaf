#include "owas/params.hpp"

#include <cmath>

#include "owas/errors.hpp"

namespace owas {

const Tensor& Params::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw ArgumentError("unknown parameter " + name);
  return it->second;
}

std::size_t Params::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : tensors) n += t.size();
  return n;
}

ad::Var Binding::operator()(const std::string& name) {
  if (auto it = bound_.find(name); it != bound_.end()) return it->second;
  const Tensor& value = params_.at(name);
  ad::Var v = trainable_ ? tape_.parameter(value) : tape_.constant(value);
  bound_.emplace(name, v);
  return v;
}

void ParamInit::weight(Params& p, const std::string& name, std::vector<int> shape, int fan_in) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  Tensor t(std::move(shape));
  for (double& x : t.values()) x = dist(rng_);
  round_to_float(t);
  p.tensors[name] = std::move(t);
}

void ParamInit::zeros(Params& p, const std::string& name, std::vector<int> shape) {
  p.tensors[name] = Tensor(std::move(shape), 0.0);
}

void ParamInit::ones(Params& p, const std::string& name, std::vector<int> shape) {
  p.tensors[name] = Tensor(std::move(shape), 1.0);
}

void ParamInit::norm(Params& p, const std::string& name, int channels) {
  ones(p, name + ".g", {channels});
  zeros(p, name + ".b", {channels});
  p.norms[name] = ad::BatchNormStats{Tensor({channels}, 0.0), Tensor({channels}, 1.0)};
}

}  // namespace owas
