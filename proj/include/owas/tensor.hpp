#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace owas {

/// Dense row-major array of doubles. Feature maps use the (N, C, T, V) layout;
/// decoder outputs drop the joint axis and use (N, C, T).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);
  Tensor(std::vector<int> shape, std::vector<double> data);

  const std::vector<int>& shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(int n, int c, int t, int v);
  double at(int n, int c, int t, int v) const;
  double& at(int n, int c, int t);
  double at(int n, int c, int t) const;

  void fill(double value);
  bool all_finite() const noexcept;
  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

std::size_t shape_size(const std::vector<int>& shape);
std::string shape_string(const std::vector<int>& shape);

/// Throws ArgumentError naming `what` unless `t` has the expected rank.
void expect_rank(const Tensor& t, int rank, const char* what);

/// Rounds every value to the nearest float32. Parameters are kept float-exact
/// so checkpoints written as float32 reload bit-identically.
void round_to_float(Tensor& t);

}  // namespace owas
