// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ncdyn {

// Dense row-major array of doubles. Rank 0 (a single scalar), 1 and 2 are
// used throughout; gradients always share the shape of their value.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape);                            // zero-filled
  Tensor(std::vector<int> shape, std::vector<double> data);           // takes ownership
  static Tensor scalar(double v);
  static Tensor filled(std::vector<int> shape, double v);
  // Checked construction for external inputs: rejects non-finite entries.
  static Tensor checked(std::vector<int> shape, std::vector<double> data);

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty() && shape_.empty(); }

  // Rank-2 accessors.
  int rows() const;
  int cols() const;
  double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(c)]; }
  double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(c)]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool is_scalar() const { return data_.size() == 1 && rank() <= 1; }
  bool all_finite() const;
  std::string shape_str() const;  // e.g. "[4,3]"

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
  int cols_ = 1;  // cached last-dim stride for rank-2 at()
};

std::size_t shape_product(const std::vector<int>& shape);

}  // namespace ncdyn
