#include "owas/tensor.hpp"

#include <cmath>
#include <sstream>

#include "owas/errors.hpp"

namespace owas {

std::size_t shape_size(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ArgumentError("negative tensor dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor(std::vector<int> shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw ArgumentError("tensor data size does not match shape " + shape_string(shape_));
  }
}

double& Tensor::at(int n, int c, int t, int v) {
  return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + t) * shape_[3] + v];
}
double Tensor::at(int n, int c, int t, int v) const {
  return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + t) * shape_[3] + v];
}
double& Tensor::at(int n, int c, int t) {
  return data_[(static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + t];
}
double Tensor::at(int n, int c, int t) const {
  return data_[(static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + t];
}

void Tensor::fill(double value) {
  for (double& x : data_) x = value;
}

bool Tensor::all_finite() const noexcept {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void expect_rank(const Tensor& t, int rank, const char* what) {
  if (t.rank() != rank) {
    throw ArgumentError(std::string(what) + ": expected rank " + std::to_string(rank) +
                        ", got shape " + shape_string(t.shape()));
  }
}

void round_to_float(Tensor& t) {
  for (double& x : t.values()) x = static_cast<double>(static_cast<float>(x));
}

}  // namespace owas
